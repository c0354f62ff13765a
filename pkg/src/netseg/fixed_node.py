"""Fixed-node, fixed-edge rewiring model with unbiased triadic closure.

Each iteration picks a uniform focal node, proposes a candidate either by a
two-step walk from the focal node (probability ``triadic_prob``) or uniformly
at random, and accepts with a type-dependent probability (``accept_same`` for
the random channel, ``accept_same_triadic`` for the walk channel; the
complements apply to cross-type pairs).  An accepted link replaces a random
existing link of the focal node, so the edge count never changes.

The mean-field description tracks the same-type edge fractions
``(p11, p22)`` through the one-step transition probabilities ``(t11, t22)``;
this module evaluates that derivative field, finds and classifies its fixed
points, and integrates the flow to the equilibrium the simulator should
reach.  One unit of mean-field time corresponds to L iterations, L = number
of links.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root

from .errors import NoStableEquilibriumError
from .graph import TypedGraph
from .rng import make_rng

_ROOT_TOL = 1e-10
_DEDUPE_TOL = 1e-6


@dataclass(frozen=True)
class FixedNodeParams:
    """Rewiring-model parameters (two groups).

    ``accept_same_triadic`` defaults to 1/2: the walk channel is blind to
    types, which is the unbiased-closure variant.
    """

    triadic_prob: float
    accept_same: float
    accept_same_triadic: float = 0.5
    group_fractions: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        for name in ("triadic_prob", "accept_same", "accept_same_triadic"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        fr = tuple(float(x) for x in self.group_fractions)
        if len(fr) != 2 or min(fr) < 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError("group_fractions must be two nonnegative shares summing to 1")
        object.__setattr__(self, "group_fractions", fr)


@dataclass(frozen=True)
class FixedPoint:
    """A root of the mean-field derivative field with its stability."""

    t11: float
    t22: float
    p11: float
    p22: float
    stable: bool
    integration: float


def two_step_probs(t11, t22):
    """Two-step same/cross landing probabilities from each group.

    Returns (T2_1same, T2_1cross, T2_2same, T2_2cross); each side's pair sums
    to 1.
    """
    t2_1s = t11 * t11 + (1 - t11) * (1 - t22)
    t2_1c = t11 * (1 - t11) + (1 - t11) * t22
    t2_2s = t22 * t22 + (1 - t22) * (1 - t11)
    t2_2c = t22 * (1 - t22) + (1 - t22) * t11
    return t2_1s, t2_1c, t2_2s, t2_2c


def meanfield_rhs(t11, t22, params: FixedNodeParams):
    """Time derivatives (dp11/dt, dp22/dt) at transition state (t11, t22)."""
    c = params.triadic_prob
    s = params.accept_same
    sp = params.accept_same_triadic
    n1, n2 = params.group_fractions
    t2_1s, t2_1c, t2_2s, t2_2c = two_step_probs(t11, t22)
    gain1 = n1 * ((1 - c) * n1 * s + c * t2_1s * sp)
    loss1 = n1 * t11 * ((1 - c) * n1 * s + c * t2_1s * sp
                        + (1 - c) * n2 * (1 - s) + c * t2_1c * (1 - sp))
    gain2 = n2 * ((1 - c) * n2 * s + c * t2_2s * sp)
    loss2 = n2 * t22 * ((1 - c) * n2 * s + c * t2_2s * sp
                        + (1 - c) * n1 * (1 - s) + c * t2_2c * (1 - sp))
    return gain1 - loss1, gain2 - loss2


def t_to_p(t11, t22):
    """Map transition probabilities to same-type edge fractions."""
    den = 2.0 - t11 - t22
    if den <= 1e-12:
        return 0.5, 0.5  # fully segregated limit t11 = t22 = 1
    return t11 * (1 - t22) / den, t22 * (1 - t11) / den


def p_to_t(p11, p22):
    """Inverse map; requires p11 + p22 <= 1."""
    return 2.0 * p11 / (1.0 + p11 - p22), 2.0 * p22 / (1.0 + p22 - p11)


def _rhs_in_p(p, params: FixedNodeParams):
    t11, t22 = p_to_t(p[0], p[1])
    return np.array(meanfield_rhs(t11, t22, params))


def _jacobian_in_p(p11, p22, params: FixedNodeParams, h: float = 1e-7) -> np.ndarray:
    j = np.empty((2, 2))
    for col, dp in enumerate(((h, 0.0), (0.0, h))):
        hi = _rhs_in_p(np.array([p11 + dp[0], p22 + dp[1]]), params)
        lo = _rhs_in_p(np.array([p11 - dp[0], p22 - dp[1]]), params)
        j[:, col] = (hi - lo) / (2 * h)
    return j


def find_fixed_points(params: FixedNodeParams, grid: int = 201) -> list[FixedPoint]:
    """All roots of the derivative field in [0,1]^2, with stability flags.

    Dense grid scan for sign changes, hybrid-method polishing, duplicates
    merged within 1e-6.  Stability comes from the Jacobian in (p11, p22)
    coordinates: stable iff every eigenvalue has negative real part.
    """
    ts = np.linspace(0.0, 1.0, grid)
    g1, g2 = np.meshgrid(ts, ts, indexing="ij")
    f1, f2 = meanfield_rhs(g1, g2, params)
    s1 = np.sign(f1)
    s2 = np.sign(f2)

    def cell_mixed(s):
        c = s[:-1, :-1]
        return ((c != s[1:, :-1]) | (c != s[:-1, 1:]) | (c != s[1:, 1:])
                | (c == 0))

    cand = np.argwhere(cell_mixed(s1) & cell_mixed(s2))
    # A few global near-zeros guard against roots missed by the cell test.
    flat = np.abs(f1) + np.abs(f2)
    extra = np.argsort(flat, axis=None)[:8]
    starts = [((i + 0.5) / (grid - 1), (j + 0.5) / (grid - 1)) for i, j in cand]
    starts += [(ts[i // grid], ts[i % grid]) for i in extra]

    found: list[tuple[float, float]] = []
    for x0 in starts:
        sol = root(lambda x: np.array(meanfield_rhs(x[0], x[1], params)),
                   x0=np.array(x0), method="hybr", tol=1e-13)
        if not sol.success:
            continue
        t11, t22 = sol.x
        if not (-1e-9 <= t11 <= 1 + 1e-9 and -1e-9 <= t22 <= 1 + 1e-9):
            continue
        t11 = min(max(t11, 0.0), 1.0)
        t22 = min(max(t22, 0.0), 1.0)
        fv = meanfield_rhs(t11, t22, params)
        if max(abs(fv[0]), abs(fv[1])) > _ROOT_TOL:
            continue
        if any(abs(t11 - a) < _DEDUPE_TOL and abs(t22 - b) < _DEDUPE_TOL
               for a, b in found):
            continue
        found.append((t11, t22))

    out = []
    for t11, t22 in sorted(found):
        p11, p22 = t_to_p(t11, t22)
        if p11 + p22 > 1.0 + 1e-9 or min(p11, p22) < -1e-9:
            continue
        jac = _jacobian_in_p(p11, p22, params)
        eig = np.linalg.eigvals(jac)
        stable = bool(np.all(eig.real < -1e-9))
        out.append(FixedPoint(t11=t11, t22=t22, p11=p11, p22=p22,
                              stable=stable,
                              integration=max(0.0, 1.0 - p11 - p22)))
    return out


def equilibrium_integration(params: FixedNodeParams,
                            start: tuple[float, float] = (0.25, 0.25),
                            horizon: float = 5000.0) -> float:
    """Integration at the stable equilibrium reached from ``start`` (p-space).

    Integrates the mean-field flow and polishes the endpoint; raises
    ``NoStableEquilibriumError`` when the flow does not settle on a root.
    """
    sol = solve_ivp(lambda _, p: _rhs_in_p(p, params), (0.0, horizon),
                    np.asarray(start, dtype=float), rtol=1e-10, atol=1e-12)
    endpoint = sol.y[:, -1]
    polish = root(lambda x: _rhs_in_p(x, params), x0=endpoint, method="hybr",
                  tol=1e-13)
    p = polish.x if polish.success else endpoint
    resid = np.abs(_rhs_in_p(p, params)).max()
    if resid > 1e-8:
        raise NoStableEquilibriumError(
            f"flow did not settle (residual {resid:.2e})")
    return float(max(0.0, 1.0 - p[0] - p[1]))


# ---------------------------------------------------------------------------
# Simulator.

@dataclass
class FixedNodeRun:
    """Trajectory of same-type edge fractions, one sample per L iterations."""

    p11: np.ndarray
    p22: np.ndarray
    no_ops: int
    isolated_fallbacks: int
    final_graph: TypedGraph | None = None

    @property
    def integration(self) -> np.ndarray:
        return 1.0 - self.p11 - self.p22


def random_two_type_graph(n: int, mean_degree: float, seed,
                          fractions: tuple[float, float] = (0.5, 0.5)) -> TypedGraph:
    """ER graph with a fixed two-group split (deterministic group sizes)."""
    rng = make_rng(seed)
    n1 = round(n * fractions[0])
    types = np.array([0] * n1 + [1] * (n - n1))
    rng.shuffle(types)
    p = mean_degree / (n - 1)
    r = rng.random((n, n))
    a = np.triu(r < p, 1)
    src, dst = np.nonzero(a)
    return TypedGraph(types, zip(src.tolist(), dst.tolist()), K=2)


def segregated_two_type_graph(n: int, mean_degree: float, seed) -> TypedGraph:
    """Two disconnected same-type ER halves (integration exactly 0)."""
    rng = make_rng(seed)
    half = n // 2
    types = np.array([0] * half + [1] * (n - half))
    p = min(1.0, mean_degree / (half - 1))
    edges = []
    for lo, hi in ((0, half), (half, n)):
        m = hi - lo
        r = rng.random((m, m))
        a = np.triu(r < p, 1)
        src, dst = np.nonzero(a)
        edges.extend((int(s) + lo, int(d) + lo) for s, d in zip(src, dst))
    return TypedGraph(types, edges, K=2)


class _BufferedUniforms:
    __slots__ = ("rng", "buf", "pos")

    def __init__(self, rng, block: int = 1 << 15):
        self.rng = rng
        self.buf = rng.random(block)
        self.pos = 0

    def u(self) -> float:
        if self.pos >= self.buf.size:
            self.buf = self.rng.random(self.buf.size)
            self.pos = 0
        x = self.buf[self.pos]
        self.pos += 1
        return x

    def below(self, n: int) -> int:
        return int(self.u() * n)


def simulate_fixed_node(initial: TypedGraph, params: FixedNodeParams,
                        iterations: int, seed,
                        record_every: int | None = None,
                        return_graph: bool = True) -> FixedNodeRun:
    """Run the rewiring chain; records (p11, p22) every ``record_every``
    iterations (default: every L, one mean-field time unit).

    No-op draws (walk dead-ends, already-linked or self candidates, rejected
    proposals) advance the clock.  An accepted proposal at a degree-0 focal
    node removes a random edge of the candidate instead, keeping the edge
    count conserved; these fallbacks are counted separately.
    """
    if initial.K != 2:
        raise ValueError("simulator expects a two-type graph")
    n = initial.node_count
    types = initial.node_types
    adj: list[list[int]] = [sorted(initial.neighbors(i)) for i in range(n)]
    pos: list[dict[int, int]] = [{v: k for k, v in enumerate(nbrs)}
                                 for nbrs in adj]
    n_edges = initial.edge_count
    if n_edges == 0:
        raise ValueError("initial graph needs at least one edge")
    counts = [0, 0, 0]  # same-0 edges, same-1 edges, cross edges
    for i, nbrs in enumerate(adj):
        for j in nbrs:
            if i < j:
                if types[i] == types[j]:
                    counts[int(types[i])] += 1
                else:
                    counts[2] += 1

    c = params.triadic_prob
    s = params.accept_same
    sp = params.accept_same_triadic
    u = _BufferedUniforms(make_rng(seed))
    every = record_every if record_every is not None else n_edges
    n_records = iterations // every
    p11 = np.empty(n_records)
    p22 = np.empty(n_records)
    no_ops = 0
    isolated = 0
    rec = 0

    def add_edge(a, b):
        adj[a].append(b)
        pos[a][b] = len(adj[a]) - 1
        adj[b].append(a)
        pos[b][a] = len(adj[b]) - 1
        if types[a] == types[b]:
            counts[int(types[a])] += 1
        else:
            counts[2] += 1

    def remove_edge(a, b):
        for x, y in ((a, b), (b, a)):
            i = pos[x].pop(y)
            last = adj[x].pop()
            if i < len(adj[x]):
                adj[x][i] = last
                pos[x][last] = i
        if types[a] == types[b]:
            counts[int(types[a])] -= 1
        else:
            counts[2] -= 1

    for it in range(1, iterations + 1):
        focal = u.below(n)
        triadic = u.u() < c
        deg_f = len(adj[focal])
        if triadic and deg_f == 0:
            triadic = False
            isolated += 1
        candidate = -1
        if triadic:
            v = adj[focal][u.below(deg_f)]
            deg_v = len(adj[v])
            if deg_v > 1:
                w = adj[v][u.below(deg_v)]
                while w == focal:
                    w = adj[v][u.below(deg_v)]
                candidate = w
            accept = sp if candidate >= 0 and types[candidate] == types[focal] \
                else 1.0 - sp
        else:
            candidate = u.below(n - 1)
            if candidate >= focal:
                candidate += 1
            accept = s if types[candidate] == types[focal] else 1.0 - s
        if candidate < 0 or candidate in pos[focal]:
            no_ops += 1
        elif u.u() < accept:
            if len(adj[focal]) > 0:
                other = adj[focal][u.below(len(adj[focal]))]
                remove_edge(focal, other)
                add_edge(focal, candidate)
            elif len(adj[candidate]) > 0:
                other = adj[candidate][u.below(len(adj[candidate]))]
                remove_edge(candidate, other)
                add_edge(focal, candidate)
            else:
                no_ops += 1  # both endpoints isolated: nothing removable
        else:
            no_ops += 1
        if it % every == 0:
            p11[rec] = counts[0] / n_edges
            p22[rec] = counts[1] / n_edges
            rec += 1

    graph = None
    if return_graph:
        edges = ((i, j) for i in range(n) for j in adj[i] if i < j)
        graph = TypedGraph(types.copy(), edges, K=2)
    return FixedNodeRun(p11=p11[:rec], p22=p22[:rec], no_ops=no_ops,
                        isolated_fallbacks=isolated, final_graph=graph)
