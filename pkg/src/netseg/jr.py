"""Two-phase growing network (Jackson-Rogers style) with typed nodes.

Each arriving node links in two phases: phase 1 picks ``similar_links``
uniform same-type targets and ``dissimilar_links`` uniform other-type
targets; phase 2 picks ``fof_links`` targets from the out-neighborhoods of
the phase-1 friends, a fraction ``alpha`` of them through the similar
friends and the rest split equally across the other types' friend pools.
All edges point from the newcomer to older nodes.

The module also carries the closed-form integration trajectory and
equilibrium, effect predicates, and the intervention calculus (immediate
and long-run effects of temporarily shifting the phase-1 mix, plus a greedy
rate-limited planner).

Randomness is organized as one Philox stream per arrival (plus one for the
seed graph), so a baseline run and an intervention run with the same seed
stay aligned everywhere outside the intervention window.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateParamsError
from .graph import TypedGraph
from .mc import sign_with_tol
from .rng import counter_rng, philox_key, randomized_round

_SEED_TAG = 1
_ARRIVAL_TAG = 2


@dataclass(frozen=True)
class JrParams:
    """Growth-model parameters.

    ``type_dist`` is the arrival-type distribution over ``n_types`` types;
    ``alpha`` must lie in (1/K, 1) for the mean-field machinery to apply.
    """

    n_types: int
    type_dist: tuple[float, ...]
    similar_links: int
    dissimilar_links: int
    fof_links: int
    alpha: float

    def __post_init__(self):
        if self.n_types < 2:
            raise ValueError("need at least 2 types")
        if len(self.type_dist) != self.n_types:
            raise ValueError("type_dist length must equal n_types")
        dist = tuple(float(x) for x in self.type_dist)
        if any(x < 0 for x in dist) or abs(sum(dist) - 1.0) > 1e-9:
            raise ValueError("type_dist must be a probability vector")
        object.__setattr__(self, "type_dist", dist)
        for name in ("similar_links", "dissimilar_links", "fof_links"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer")
        if self.similar_links + self.dissimilar_links < 1:
            raise ValueError("phase 1 must make at least one link")
        if not (1.0 / self.n_types < self.alpha < 1.0):
            raise ValueError("alpha must lie strictly between 1/K and 1")

    @property
    def total_links(self) -> int:
        return self.similar_links + self.dissimilar_links + self.fof_links


@dataclass(frozen=True)
class DerivedRates:
    """Mean-field rates derived from the parameters.

    ``phase1_fraction``/``fof_fraction`` split each arrival's links between
    the two phases; the bias terms are the secondary eigenvalues of the
    phase mixing matrices (1 = fully same-type, 0 = type-blind).
    """

    total_links: int
    phase1_fraction: float
    fof_fraction: float
    phase1_bias: float
    fof_bias: float


def derived_rates(params: JrParams) -> DerivedRates:
    n = params.total_links
    k = params.n_types
    n_r = params.similar_links + params.dissimilar_links
    phase1_bias = (k * params.similar_links / n_r - 1.0) / (k - 1.0)
    fof_bias = (k * params.alpha - 1.0) / (k - 1.0)
    return DerivedRates(total_links=n,
                        phase1_fraction=n_r / n,
                        fof_fraction=params.fof_links / n,
                        phase1_bias=phase1_bias,
                        fof_bias=fof_bias)


def equilibrium_integration(params: JrParams) -> float:
    """Long-run integration; independent of the type distribution."""
    k = params.n_types
    if not (1.0 / k < params.alpha < 1.0):
        raise DegenerateParamsError("alpha out of range (1/K, 1)")
    one_minus = 1.0 - params.alpha
    num = params.dissimilar_links + one_minus * params.fof_links
    den = params.similar_links + params.dissimilar_links \
        + k / (k - 1.0) * one_minus * params.fof_links
    return num / den


def mono_trajectory(params: JrParams, t: int) -> float:
    """Leading-order expected count of monochromatic edges at age ``t``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    d = derived_rates(params)
    k = params.n_types
    per_step = (d.total_links * d.phase1_fraction / k) * (
        1.0 / (1.0 - d.fof_fraction)
        + (k - 1.0) * d.phase1_bias / (1.0 - d.fof_fraction * d.fof_bias))
    return t * per_step


def integration_at(params: JrParams, t: int) -> float:
    """Leading-order integration at age ``t`` (the equilibrium line).

    The dropped correction decays like t**(-(N_S+N_D)/N); see
    ``convergence_exponent``.
    """
    return 1.0 - mono_trajectory(params, t) / (params.total_links * t)


def convergence_exponent(params: JrParams) -> float:
    """Exponent of the residual decay |f(t) - f_inf| = O(t**exponent)."""
    d = derived_rates(params)
    return d.fof_fraction - 1.0


@dataclass(frozen=True)
class EffectPredicates:
    absolute: str
    relative: str


def effect_predicates(params: JrParams) -> EffectPredicates:
    """Sign of the absolute / relative effect of raising the friend-of-friend
    link count: positive iff similar_links > dissimilar_links / (K - 1)."""
    margin = params.similar_links - params.dissimilar_links / (params.n_types - 1.0)
    s = sign_with_tol(margin, 1e-12)
    return EffectPredicates(absolute=s, relative=s)


# ---------------------------------------------------------------------------
# Interventions on the phase-1 mix.

@dataclass(frozen=True)
class InterventionPlan:
    """A schedule of phase-1 shifts at ages start_time+1 .. start_time+length.

    ``delta_similar[i]`` is added to the similar-link count (and subtracted
    from the dissimilar count) of the arrival at age start_time+1+i, so the
    phase-1 total stays fixed.  Values are real; the simulator rounds
    stochastically.
    """

    start_time: int
    delta_similar: tuple[float, ...]
    rate_limit: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "delta_similar",
                           tuple(float(x) for x in self.delta_similar))
        if self.start_time < 1:
            raise ValueError("start_time must be >= 1")
        if self.rate_limit < 0:
            raise ValueError("rate_limit must be >= 0")

    @property
    def length(self) -> int:
        return len(self.delta_similar)


def validate_plan(params: JrParams, plan: InterventionPlan) -> None:
    """Check the per-arrival link counts stay feasible; warn on short lead-in."""
    ns, nd = params.similar_links, params.dissimilar_links
    for d in plan.delta_similar:
        if ns + d < -1e-9 or nd - d < -1e-9:
            raise ValueError(
                f"delta {d} leaves a negative link count (bounds [-{ns}, {nd}])")
    if plan.length and plan.start_time < 20 * plan.length:
        warnings.warn("intervention window is not small next to the network age "
                      "(want start_time >= 20 * length); mean-field predictions "
                      "may be loose", stacklevel=3)


def intervention_immediate_effect(params: JrParams,
                                  plan: InterventionPlan) -> tuple[np.ndarray, float]:
    """Expected per-intervention and total integration change at the window end.

    Effect of the i-th shift (i = 1..I) on f(T+I):
    -(1/(N(T+I))) * [1 + (N_F/(N T)) (I-i) (K a - 1)/(K - 1)] * delta_i.
    """
    validate_plan(params, plan)
    d = derived_rates(params)
    n = d.total_links
    t0, i_len = plan.start_time, plan.length
    idx = np.arange(1, i_len + 1)
    bracket = 1.0 + (d.fof_fraction / t0) * (i_len - idx) * d.fof_bias
    per = -(1.0 / (n * (t0 + i_len))) * bracket * np.asarray(plan.delta_similar)
    return per, float(per.sum())


def intervention_longterm_effect(params: JrParams, plan: InterventionPlan,
                                 t: int) -> tuple[np.ndarray, float]:
    """Expected per-intervention integration change long after the window.

    Each shift contributes -(1/(N t)) * (t/(T+I))**(m_s d_s) * delta_i, the
    same t**(m_s d_s - 1) decay law as the window-end effect continued in
    time; it vanishes as t grows since m_s d_s < 1.
    """
    validate_plan(params, plan)
    d = derived_rates(params)
    horizon = plan.start_time + plan.length
    if t < horizon:
        raise ValueError("t must be past the intervention window")
    if t < 5 * horizon:
        warnings.warn("long-run formula applied at t < 5 (T+I); "
                      "expect visible transients", stacklevel=2)
    decay = (t / horizon) ** (d.fof_fraction * d.fof_bias)
    per = -(decay / (d.total_links * t)) * np.asarray(plan.delta_similar)
    return per, float(per.sum())


def plan_step_gains(params: JrParams, plan: InterventionPlan) -> np.ndarray:
    """Predicted integration gain f(T+j) - f(T+j-1) for each window step.

    Evaluated at the same uniform-1/T approximation the planner uses, so a
    plan built by ``optimal_interventions`` shows gains exactly at the rate
    limit until clamping sets in.
    """
    d = derived_rates(params)
    n, t0 = d.total_links, plan.start_time
    deltas = np.asarray(plan.delta_similar)
    prefix = np.concatenate(([0.0], np.cumsum(deltas)[:-1]))
    return -deltas / (n * t0) \
        + (1.0 - d.fof_fraction * d.fof_bias) * prefix / (n * t0 * t0)


def closed_form_interventions(params: JrParams, start_time: int, length: int,
                              rate_limit: float) -> np.ndarray:
    """Unclamped optimal schedule: delta_j = -N T D rho**(j-1) with
    rho = 1 + (1 - m_s d_s)/T."""
    d = derived_rates(params)
    rho = 1.0 + (1.0 - d.fof_fraction * d.fof_bias) / start_time
    j = np.arange(length)
    return -d.total_links * start_time * rate_limit * rho ** j


@dataclass(frozen=True)
class PlannedInterventions:
    plan: InterventionPlan
    achieved_gain: float
    clamped: bool
    step_gains: np.ndarray = field(repr=False)


def optimal_interventions(params: JrParams, start_time: int, length: int,
                          rate_limit: float) -> PlannedInterventions:
    """Greedy rate-limited schedule maximizing integration at the window end.

    Binds each step's predicted gain to the rate limit:
    x_j = min(N_S, N T D + (1 - m_s d_s)/T * sum_{i<j} x_i), delta_j = -x_j.
    When N_S >= N T D * T/(T - 2I) the clamp never fires and the schedule
    equals ``closed_form_interventions`` with achieved gain I * D.
    """
    if rate_limit < 0:
        raise ValueError("rate_limit must be >= 0")
    if length < 1:
        raise ValueError("length must be >= 1")
    d = derived_rates(params)
    n, t0 = d.total_links, start_time
    shrink = (1.0 - d.fof_fraction * d.fof_bias) / t0
    cap = float(params.similar_links)
    xs = np.empty(length)
    acc = 0.0
    clamped = False
    for j in range(length):
        x = n * t0 * rate_limit + shrink * acc
        if x >= cap:
            x = cap
            clamped = True
        xs[j] = x
        acc += x
    plan = InterventionPlan(start_time=t0, delta_similar=tuple(-xs),
                            rate_limit=rate_limit)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gains = plan_step_gains(params, plan)
    return PlannedInterventions(plan=plan, achieved_gain=float(gains.sum()),
                                clamped=clamped, step_gains=gains)


# ---------------------------------------------------------------------------
# Simulator.

class _Uniforms:
    """Buffered uniform draws from one generator (cuts per-call overhead)."""

    __slots__ = ("rng", "buf", "pos")

    def __init__(self, rng, block: int):
        self.rng = rng
        self.buf = rng.random(block)
        self.pos = 0

    def u(self) -> float:
        if self.pos >= self.buf.size:
            self.buf = self.rng.random(32)
            self.pos = 0
        x = self.buf[self.pos]
        self.pos += 1
        return x

    # Generator-compatible alias so rng helpers accept a _Uniforms.
    def random(self) -> float:
        return self.u()

    def below(self, n: int) -> int:
        return int(self.u() * n)


@dataclass
class JrRun:
    """One growth-simulation run.

    ``f_total[t]`` is the graph's integration after arrival t (seed edges
    included); ``f_new[t]`` restricts to arrival-made edges, which is the
    quantity the closed forms describe.  Index 0 holds the seed-graph state.
    """

    params: JrParams
    t_max: int
    f_total: np.ndarray
    f_new: np.ndarray
    shortfalls: int
    final_graph: TypedGraph | None = None

    @property
    def final_integration(self) -> float:
        return float(self.f_total[-1])


def _largest_remainder(total: int, weights) -> list[int]:
    """Integer allocation of ``total`` by ``weights``, each part >= 1."""
    w = np.asarray(weights, dtype=float)
    raw = total * w / w.sum()
    base = np.maximum(np.floor(raw).astype(int), 1)
    while base.sum() > total:
        base[int(np.argmax(base))] -= 1
    rem = total - base.sum()
    order = np.argsort(-(raw - np.floor(raw)))
    for i in range(rem):
        base[order[i % len(base)]] += 1
    return base.tolist()


def default_seed_graph(params: JrParams, seed_key, segregated: bool = False) -> TypedGraph:
    """Seed graph on 2N nodes: complete, or per-type cliques if segregated."""
    rng = counter_rng(seed_key, 0, tag=_SEED_TAG)
    size = max(2 * params.total_links, params.n_types * 2, 4)
    sizes = _largest_remainder(size, params.type_dist)
    types = np.repeat(np.arange(params.n_types), sizes)
    rng.shuffle(types)
    if segregated:
        edges = [(i, j) for i in range(size) for j in range(i + 1, size)
                 if types[i] == types[j]]
    else:
        edges = [(i, j) for i in range(size) for j in range(i + 1, size)]
    return TypedGraph(types, edges, directed=True, K=params.n_types)


def _draw_distinct(pool: list, want: int, u: _Uniforms) -> list:
    """Uniform distinct sample of ``want`` items (all of them if short)."""
    m = len(pool)
    if want >= m:
        return list(pool)
    picked: set[int] = set()
    out = []
    while len(out) < want:
        i = u.below(m)
        if i not in picked:
            picked.add(i)
            out.append(pool[i])
    return out


def grow_network(params: JrParams, t_max: int, seed,
                 seed_graph: TypedGraph | None = None,
                 counts_fn=None,
                 return_graph: bool = True,
                 segregated_seed: bool = False) -> JrRun:
    """Run the two-phase growth engine.

    ``counts_fn(t, uniforms)`` supplies per-arrival link counts
    (similar, dissimilar, fof_similar_side, fof_dissimilar_side); the default
    uses the fixed parameter counts with the alpha split rounded
    stochastically.  Candidate-pool shortfalls (not enough similar nodes
    early on, or an other-type pool with no reachable member) take whatever
    is available and bump the run's shortfall counter rather than failing.
    """
    key = philox_key(seed)
    k = params.n_types
    ns, nd, nf = params.similar_links, params.dissimilar_links, params.fof_links
    alpha = params.alpha
    if counts_fn is None:
        def counts_fn(_t, u):
            nfs = randomized_round(alpha * nf, u) if nf else 0
            return ns, nd, nfs, nf - nfs
    dist_cum = np.cumsum(params.type_dist)

    g0 = seed_graph if seed_graph is not None \
        else default_seed_graph(params, key, segregated=segregated_seed)
    if g0.K != k:
        raise ValueError("seed graph type count differs from params")
    n0 = g0.node_count
    n_total = n0 + t_max

    types = np.empty(n_total, dtype=np.int64)
    types[:n0] = g0.node_types
    out_adj: list[list[int]] = [sorted(g0.out_neighbors(i)) for i in range(n0)]
    by_type: list[list[int]] = [[] for _ in range(k)]
    for i in range(n0):
        by_type[types[i]].append(i)
    type_counts = np.array([len(b) for b in by_type], dtype=np.int64)

    mono_all = bi_all = 0
    for i, j in g0.edges():
        if types[i] == types[j]:
            mono_all += 1
        else:
            bi_all += 1
    mono_new = bi_new = 0
    shortfalls = 0

    f_total = np.empty(t_max + 1)
    f_new = np.full(t_max + 1, np.nan)
    e_all = mono_all + bi_all
    f_total[0] = bi_all / e_all if e_all else np.nan

    other_types = [[tp for tp in range(k) if tp != th] for th in range(k)]

    for t in range(1, t_max + 1):
        u = _Uniforms(counter_rng(key, t, tag=_ARRIVAL_TAG),
                      2 * params.total_links + 8)
        new = n0 + t - 1
        theta = int(np.searchsorted(dist_cum, u.u(), side="right"))
        if theta >= k:
            theta = k - 1

        ns_t, nd_t, n_sim_fof, n_dis_fof = counts_fn(t, u)

        # phase 1: uniform similar and dissimilar targets
        targets: list[int] = []
        linked: set[int] = set()
        sim_pool_src = by_type[theta]
        sim_friends = _draw_distinct(sim_pool_src, ns_t, u)
        shortfalls += ns_t - len(sim_friends)
        n_other = int(type_counts.sum() - type_counts[theta])
        dis_friends: list[int] = []
        if nd_t > 0:
            if n_other <= nd_t:
                for tp in other_types[theta]:
                    dis_friends.extend(by_type[tp])
                shortfalls += nd_t - len(dis_friends)
            else:
                picked: set[int] = set()
                while len(dis_friends) < nd_t:
                    r = u.below(n_other)
                    for tp in other_types[theta]:
                        c = int(type_counts[tp])
                        if r < c:
                            node = by_type[tp][r]
                            break
                        r -= c
                    if node not in picked:
                        picked.add(node)
                        dis_friends.append(node)
        for f in sim_friends + dis_friends:
            targets.append(f)
            linked.add(f)

        # phase 2: friend-of-friend targets, alpha-split between sides
        if n_sim_fof or n_dis_fof:
            if n_sim_fof > 0:
                pool = set()
                for f in sim_friends:
                    pool.update(out_adj[f])
                pool -= linked
                got = _draw_distinct(sorted(pool), n_sim_fof, u)
                shortfalls += n_sim_fof - len(got)
                for x in got:
                    targets.append(x)
                    linked.add(x)
            if n_dis_fof > 0:
                pools = {}
                for f in dis_friends:
                    pools.setdefault(int(types[f]), set()).update(out_adj[f])
                for s in pools.values():
                    s -= linked
                n_slots = k - 1
                base, rem = divmod(n_dis_fof, n_slots)
                want = {tp: base for tp in other_types[theta]}
                if rem:
                    picks = other_types[theta][:]
                    for _ in range(rem):
                        i = u.below(len(picks))
                        want[picks.pop(i)] += 1
                leftover = 0
                for tp in other_types[theta]:
                    w = want[tp]
                    if w == 0:
                        continue
                    pool = sorted(pools.get(tp, ()))
                    got = _draw_distinct(pool, w, u)
                    leftover += w - len(got)
                    for x in got:
                        targets.append(x)
                        linked.add(x)
                        for s in pools.values():
                            s.discard(x)
                if leftover:
                    # spill unfillable per-type quotas into the other pools
                    for tp in other_types[theta]:
                        if leftover == 0:
                            break
                        pool = sorted(pools.get(tp, ()))
                        got = _draw_distinct(pool, leftover, u)
                        leftover -= len(got)
                        for x in got:
                            targets.append(x)
                            linked.add(x)
                            for s in pools.values():
                                s.discard(x)
                    shortfalls += leftover

        out_adj.append(targets)
        types[new] = theta
        by_type[theta].append(new)
        type_counts[theta] += 1
        for tgt in targets:
            if types[tgt] == theta:
                mono_all += 1
                mono_new += 1
            else:
                bi_all += 1
                bi_new += 1
        e_all = mono_all + bi_all
        e_new = mono_new + bi_new
        f_total[t] = bi_all / e_all if e_all else np.nan
        f_new[t] = bi_new / e_new if e_new else np.nan

    graph = None
    if return_graph:
        edges = ((i, j) for i in range(n_total) for j in out_adj[i])
        graph = TypedGraph(types, edges, directed=True, K=k)
    return JrRun(params=params, t_max=t_max, f_total=f_total, f_new=f_new,
                 shortfalls=shortfalls, final_graph=graph)


def simulate_jr(params: JrParams, t_max: int, seed,
                seed_graph: TypedGraph | None = None,
                plan: InterventionPlan | None = None,
                return_graph: bool = True,
                segregated_seed: bool = False) -> JrRun:
    """Grow the network for ``t_max`` arrivals and record integration.

    With a ``plan``, arrivals inside the window use the shifted phase-1 mix
    (rounded stochastically; the phase-1 total stays fixed).  A plan of zeros
    consumes exactly the same randomness as no plan at all.
    """
    counts_fn = None
    if plan is not None:
        validate_plan(params, plan)
        ns, nd, nf = params.similar_links, params.dissimilar_links, params.fof_links
        alpha = params.alpha
        start, end = plan.start_time, plan.start_time + plan.length

        def counts_fn(t, u):
            ns_t, nd_t = ns, nd
            if start < t <= end:
                ns_t = randomized_round(ns + plan.delta_similar[t - start - 1], u)
                nd_t = ns + nd - ns_t
            nfs = randomized_round(alpha * nf, u) if nf else 0
            return ns_t, nd_t, nfs, nf - nfs

    return grow_network(params, t_max, seed, seed_graph=seed_graph,
                        counts_fn=counts_fn, return_graph=return_graph,
                        segregated_seed=segregated_seed)


@dataclass
class PairedRun:
    baseline: JrRun
    treated: JrRun

    def delta_f(self, t: int | None = None) -> float:
        """Treated-minus-baseline integration (arrival edges) at age t."""
        idx = -1 if t is None else t
        return float(self.treated.f_new[idx] - self.baseline.f_new[idx])


def simulate_with_interventions(params: JrParams, plan: InterventionPlan,
                                t_max: int, seed,
                                return_graphs: bool = False,
                                segregated_seed: bool = False) -> PairedRun:
    """Baseline and intervention runs sharing every per-arrival stream."""
    if t_max < plan.start_time + plan.length:
        raise ValueError("t_max must cover the intervention window")
    base = simulate_jr(params, t_max, seed, return_graph=return_graphs,
                       segregated_seed=segregated_seed)
    treat = simulate_jr(params, t_max, seed, plan=plan,
                        return_graph=return_graphs,
                        segregated_seed=segregated_seed)
    return PairedRun(baseline=base, treated=treat)
