"""Fitting the growth model to citation-style data.

Pipeline: ingest JSON-lines citation records -> keep a year window and the
major fields of study -> cluster fields by cross-citation weight -> for each
paper, enumerate the feasible phase assignments of its references (phase 1 =
directly chosen, phase 2 = found through a phase-1 reference) -> maximize the
marginal likelihood of the per-phase link counts under exponential priors ->
map the fitted means through the growth model's equilibrium formula.

A reference ``w`` of paper ``u`` may sit in phase 2 only if some other
reference ``v`` of ``u`` cites ``w`` (a mediator); the all-phase-1 labeling
is always feasible.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.optimize import minimize
from scipy.special import logsumexp

from .errors import FitError
from .jr import JrParams, JrRun, grow_network
from .rng import make_rng, randomized_round

ENUMERATION_CAP = 16      # exact feasible-set enumeration up to this |V(u)|
ASSIGNMENT_SAMPLE = 512   # uniform feasible sample size beyond the cap
LOG_BOUND = (math.log(1e-3), math.log(1e3))


@dataclass(frozen=True)
class CitationRecord:
    """One paper: weighted fields of study and outgoing references."""

    id: str
    year: int
    fields_of_study: tuple[tuple[str, float], ...]
    references: tuple[str, ...]


@dataclass
class CitationDataset:
    """Ingested, filtered records with argmax-field node types."""

    ids: list[str]
    years: np.ndarray
    field_names: list[str]                  # major fields, sorted
    record_fields: list[list[tuple[int, float]]]
    node_field: np.ndarray                  # argmax major field per record
    refs: list[np.ndarray]                  # intra-dataset, by record index
    skipped_lines: int = 0

    @property
    def n_records(self) -> int:
        return len(self.ids)

    def citation_count(self) -> int:
        return int(sum(len(r) for r in self.refs))


def _parse_record(line: str) -> CitationRecord | None:
    try:
        raw = json.loads(line)
        fos = tuple((str(f["name"]), float(f["w"])) for f in raw.get("fos", []))
        refs = tuple(str(r) for r in raw.get("references", []))
        return CitationRecord(id=str(raw["id"]), year=int(raw["year"]),
                              fields_of_study=fos, references=refs)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        return None


def ingest(path, years: tuple[int, int] = (2015, 2020),
           min_field_share: float = 0.01) -> CitationDataset:
    """Load records, keep the year window and the major fields.

    A field is *major* when it appears in at least ``min_field_share`` of the
    in-window records; records left without any major field are dropped, as
    are references leaving the retained set.  Malformed lines are skipped and
    counted.
    """
    records: list[CitationRecord] = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = _parse_record(line)
            if rec is None:
                skipped += 1
                continue
            if years[0] <= rec.year <= years[1]:
                records.append(rec)
    if not records:
        raise ValueError(f"no records in {path!s} within years {years}")

    freq: dict[str, int] = {}
    for rec in records:
        for name, _ in rec.fields_of_study:
            freq[name] = freq.get(name, 0) + 1
    threshold = min_field_share * len(records)
    major = sorted(name for name, cnt in freq.items() if cnt >= threshold)
    fidx = {name: i for i, name in enumerate(major)}

    kept: list[CitationRecord] = []
    rec_fields: list[list[tuple[int, float]]] = []
    node_field: list[int] = []
    for rec in records:
        fs = [(fidx[n], w) for n, w in rec.fields_of_study if n in fidx]
        if not fs:
            continue
        # argmax weight; ties broken by field name order (fidx is sorted)
        best = min(fs, key=lambda t: (-t[1], t[0]))[0]
        kept.append(rec)
        rec_fields.append(fs)
        node_field.append(best)
    if not kept:
        raise ValueError("every record lost its fields at the major-field cut")

    index = {rec.id: i for i, rec in enumerate(kept)}
    refs = [np.array(sorted({index[r] for r in rec.references
                             if r in index and index[r] != i}), dtype=np.int64)
            for i, rec in enumerate(kept)]
    return CitationDataset(ids=[r.id for r in kept],
                           years=np.array([r.year for r in kept]),
                           field_names=major,
                           record_fields=rec_fields,
                           node_field=np.array(node_field, dtype=np.int64),
                           refs=refs,
                           skipped_lines=skipped)


# ---------------------------------------------------------------------------
# Field clustering.

@dataclass(frozen=True)
class FieldClustering:
    cluster_of: dict[str, int]
    n_clusters: int
    eigenvalues: np.ndarray


def field_cocitation_matrix(ds: CitationDataset) -> np.ndarray:
    """Symmetric cross-citation counts between major fields (zero diagonal)."""
    m = len(ds.field_names)
    w = np.zeros((m, m))
    for u, targets in enumerate(ds.refs):
        fu = ds.record_fields[u]
        for v in targets:
            for f1, _ in fu:
                for f2, _ in ds.record_fields[v]:
                    w[f1, f2] += 1.0
    w = w + w.T
    np.fill_diagonal(w, 0.0)
    return w


def cluster_fields(ds: CitationDataset, k: int | None = None, seed=0,
                   k_max: int = 10) -> FieldClustering:
    """Normalized-Laplacian spectral clustering of the field graph.

    ``k`` defaults to the largest eigengap of the Laplacian spectrum.
    Zero-degree fields become their own clusters; disconnected components
    separate through the zero eigenvalues.
    """
    m = len(ds.field_names)
    if m < 2:
        raise ValueError("need at least 2 major fields to cluster")
    w = field_cocitation_matrix(ds)
    deg = w.sum(axis=1)
    active = np.flatnonzero(deg > 0)
    isolated = np.flatnonzero(deg == 0)

    labels = np.full(m, -1, dtype=int)
    eigenvalues = np.array([])
    n_main = 0
    if active.size:
        wa = w[np.ix_(active, active)]
        da = wa.sum(axis=1)
        inv_sqrt = 1.0 / np.sqrt(da)
        lap = np.eye(active.size) - inv_sqrt[:, None] * wa * inv_sqrt[None, :]
        vals, vecs = np.linalg.eigh(lap)
        eigenvalues = vals
        if k is None:
            top = min(k_max, active.size - 1)
            if top < 1:
                n_main = 1
            else:
                gaps = vals[1:top + 1] - vals[:top]
                n_main = int(np.argmax(gaps)) + 1
        else:
            n_main = min(k, active.size)
        if n_main == 1:
            labels[active] = 0
        else:
            emb = vecs[:, :n_main]
            norms = np.linalg.norm(emb, axis=1)
            norms[norms == 0] = 1.0
            emb = emb / norms[:, None]
            _, asg = kmeans2(emb, n_main, minit="++",
                             seed=make_rng(seed), missing="warn")
            labels[active] = asg
    for j, f in enumerate(isolated):
        labels[f] = n_main + j
    cluster_of = {ds.field_names[i]: int(labels[i]) for i in range(m)}
    return FieldClustering(cluster_of=cluster_of,
                           n_clusters=int(labels.max()) + 1,
                           eigenvalues=eigenvalues)


# ---------------------------------------------------------------------------
# Phase assignments.

def enumerate_feasible_assignments(in_neighbors, cap: int = ENUMERATION_CAP,
                                   sample_size: int = ASSIGNMENT_SAMPLE,
                                   seed=0) -> tuple[np.ndarray, bool]:
    """Feasible phase-2 indicator matrix for one reference neighborhood.

    ``in_neighbors[w]`` lists the local indices that cite member ``w``.  A
    labeling is feasible when every phase-2 member keeps at least one phase-1
    in-neighbor.  Members without in-neighbors are forced to phase 1.  Exact
    enumeration up to ``cap`` members; beyond that a uniform sample (with
    replacement, by rejection) of ``sample_size`` labelings.

    Returns (bool matrix: assignments x members, exact_flag).
    """
    m = len(in_neighbors)
    eligible = [w for w in range(m) if len(in_neighbors[w]) > 0]
    if not eligible:
        return np.zeros((1, m), dtype=bool), True
    e = len(eligible)
    pos = {w: b for b, w in enumerate(eligible)}
    # An in-neighbor outside `eligible` is itself forced to phase 1, so the
    # member it mediates is feasible in every labeling.
    always_ok = np.zeros(e, dtype=bool)
    for b, w in enumerate(eligible):
        if any(v not in pos for v in in_neighbors[w]):
            always_ok[b] = True

    med_idx = [np.array([pos[v] for v in in_neighbors[w] if v in pos],
                        dtype=np.int64) for w in eligible]

    def feasible_rows(rows: np.ndarray) -> np.ndarray:
        ok = np.ones(rows.shape[0], dtype=bool)
        for b in range(e):
            if always_ok[b]:
                continue
            smothered = rows[:, med_idx[b]].all(axis=1)
            ok &= ~(rows[:, b] & smothered)
        return ok

    if m <= cap:
        subsets = np.arange(1 << e, dtype=np.int64)
        rows = (subsets[:, None] >> np.arange(e)[None, :]) & 1 == 1
        good = rows[feasible_rows(rows)]
        exact = True
    else:
        rng = make_rng(seed)
        chunks = []
        need = sample_size
        for _ in range(64):
            draw = rng.random((4 * need, e)) < 0.5
            ok = draw[feasible_rows(draw)]
            chunks.append(ok[:need])
            need -= len(chunks[-1])
            if need <= 0:
                break
        good = np.concatenate(chunks, axis=0)
        if good.shape[0] == 0:
            good = np.zeros((1, e), dtype=bool)  # all-phase-1 fallback
        exact = False

    out = np.zeros((good.shape[0], m), dtype=bool)
    for b, w in enumerate(eligible):
        out[:, w] = good[:, b]
    return out, exact


def assignment_stats(in_neighbors, same_type: np.ndarray,
                     phase2: np.ndarray) -> np.ndarray:
    """Observed (n_s, n_d, n_fs, n_fd) for each assignment row.

    Phase-1 members count into n_s/n_d by type match with the citing paper;
    each phase-2 member splits one unit between n_fs and n_fd by the type mix
    of its phase-1 in-neighbors.
    """
    a, m = phase2.shape
    phase1 = ~phase2
    same = same_type[None, :]
    counts = np.empty((a, 4))
    counts[:, 0] = (phase1 & same).sum(axis=1)
    counts[:, 1] = (phase1 & ~same).sum(axis=1)
    n_fs = np.zeros(a)
    n_fd = np.zeros(a)
    for w in range(m):
        med = np.asarray(in_neighbors[w], dtype=np.int64)
        active = phase2[:, w]
        if med.size == 0:
            if active.any():
                raise ValueError("infeasible assignment: phase-2 member "
                                 "without in-neighbors")
            continue
        med_p1 = phase1[:, med]
        tot = med_p1.sum(axis=1).astype(float)
        if np.any(active & (tot == 0)):
            raise ValueError("infeasible assignment: phase-2 member with no "
                             "phase-1 mediator")
        sim = (med_p1 & same_type[med][None, :]).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(tot > 0, sim / np.where(tot > 0, tot, 1.0), 0.0)
        n_fs += np.where(active, frac, 0.0)
        n_fd += np.where(active, 1.0 - frac, 0.0)
    counts[:, 2] = n_fs
    counts[:, 3] = n_fd
    return counts


@dataclass
class NodeEvidence:
    """Per-assignment observed counts for one paper."""

    node_id: str
    counts: np.ndarray          # (n_assignments, 4)
    exact: bool


@dataclass(frozen=True)
class Theta:
    """Exponential-prior means of the per-arrival link counts.

    The likelihood needs every component strictly positive; the equilibrium
    prediction also accepts boundary zeros (no friend-of-friend channel).
    """

    n_s: float
    n_d: float
    n_fs: float
    n_fd: float

    def __post_init__(self):
        if min(self.n_s, self.n_d, self.n_fs, self.n_fd) < 0:
            raise ValueError("theta components must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([self.n_s, self.n_d, self.n_fs, self.n_fd])

    @property
    def fof_total(self) -> float:
        return self.n_fs + self.n_fd

    @property
    def alpha(self) -> float:
        tot = self.fof_total
        return self.n_fs / tot if tot > 0 else float("nan")


def node_log_likelihood(evidence: NodeEvidence, theta: Theta) -> float:
    """Log of the assignment-averaged exponential likelihood of one paper."""
    th = theta.as_array()
    if np.any(th <= 0):
        raise ValueError("likelihood requires strictly positive theta")
    z = -(evidence.counts @ (1.0 / th))
    return float(-np.log(th).sum() + logsumexp(z) - math.log(len(z)))


def build_evidence(ds: CitationDataset, members: np.ndarray | None = None,
                   type_of: np.ndarray | None = None,
                   cap: int = ENUMERATION_CAP,
                   sample_size: int = ASSIGNMENT_SAMPLE,
                   seed=0) -> list[NodeEvidence]:
    """Assignment-count evidence for every paper with at least one reference.

    ``members`` restricts the graph to a cluster (references leaving it are
    dropped); ``type_of`` overrides the per-record type (defaults to the
    argmax major field).
    """
    if members is None:
        members = np.arange(ds.n_records)
    member_set = set(int(x) for x in members)
    types = ds.node_field if type_of is None else type_of
    out: list[NodeEvidence] = []
    for u in members:
        u = int(u)
        targets = [int(v) for v in ds.refs[u] if int(v) in member_set]
        if not targets:
            continue
        pos = {v: i for i, v in enumerate(targets)}
        in_nbrs: list[list[int]] = [[] for _ in targets]
        for v in targets:
            for w in ds.refs[v]:
                w = int(w)
                if w in pos:
                    in_nbrs[pos[w]].append(pos[v])
        same = np.array([types[v] == types[u] for v in targets], dtype=bool)
        # per-node sampling seed keyed on the node id, so evidence does not
        # depend on the iteration order of `members`
        node_seed = np.random.SeedSequence(
            (int(seed), zlib.crc32(ds.ids[u].encode())))
        phase2, exact = enumerate_feasible_assignments(
            in_nbrs, cap=cap, sample_size=sample_size, seed=node_seed)
        counts = assignment_stats(in_nbrs, same, phase2)
        out.append(NodeEvidence(node_id=ds.ids[u], counts=counts, exact=exact))
    return out


# ---------------------------------------------------------------------------
# Likelihood maximization.

@dataclass
class FitReport:
    theta: Theta
    log_likelihood: float
    n_nodes: int
    converged: bool
    at_lower_bound: tuple[bool, bool, bool, bool]
    start_optima: list[tuple[tuple[float, float, float, float], float, bool]] = field(
        default_factory=list)


def _stacked(evidences: list[NodeEvidence]):
    evs = sorted(evidences, key=lambda e: e.node_id)
    counts = np.concatenate([e.counts for e in evs], axis=0)
    lens = np.array([len(e.counts) for e in evs])
    offsets = np.concatenate(([0], np.cumsum(lens)[:-1]))
    return counts, offsets, lens


def fit_theta(evidences: list[NodeEvidence], seed=0, n_starts: int = 8,
              min_nodes: int = 50) -> FitReport:
    """Maximize the summed marginal log-likelihood over theta.

    Quasi-Newton (L-BFGS-B) in log-parameter space with central-difference
    gradients and multiple restarts; the problem is non-convex, so the best
    restart wins.  Components pinned at the lower bound are flagged (this is
    the no-phase-2-evidence degeneracy).
    """
    if len(evidences) < min_nodes:
        raise ValueError(f"need at least {min_nodes} usable nodes, "
                         f"got {len(evidences)}")
    counts, offsets, lens = _stacked(evidences)
    n_nodes = len(lens)
    log_a = np.log(lens.astype(float)).sum()

    def neg_ll(x: np.ndarray) -> float:
        th = np.exp(x)
        z = -(counts @ (1.0 / th))
        seg_max = np.maximum.reduceat(z, offsets)
        shifted = np.exp(z - np.repeat(seg_max, lens))
        seg_sum = np.add.reduceat(shifted, offsets)
        total = seg_max.sum() + np.log(seg_sum).sum() - log_a \
            - n_nodes * x.sum()
        return -float(total)

    rng = make_rng(seed)
    lo, hi = LOG_BOUND
    results = []
    for _ in range(n_starts):
        x0 = rng.uniform(math.log(0.1), math.log(50.0), size=4)
        res = minimize(neg_ll, x0, method="L-BFGS-B", jac="3-point",
                       bounds=[LOG_BOUND] * 4,
                       options={"maxiter": 500, "ftol": 1e-12, "gtol": 1e-8})
        results.append(res)
    best = min(results, key=lambda r: r.fun)
    any_ok = any(r.success for r in results)
    theta_tuple = tuple(float(v) for v in np.exp(best.x))
    report = FitReport(
        theta=Theta(*theta_tuple),
        log_likelihood=-float(best.fun),
        n_nodes=n_nodes,
        converged=any_ok,
        at_lower_bound=tuple(bool(x < lo + 1e-6) for x in best.x),
        start_optima=[(tuple(float(v) for v in np.exp(r.x)), -float(r.fun),
                       bool(r.success)) for r in results],
    )
    if not any_ok:
        raise FitError("no restart converged", best=report)
    return report


@dataclass(frozen=True)
class EquilibriumPrediction:
    f_inf: float
    f_inf_no_tc: float
    tc_contribution: float
    alpha: float
    alpha_valid: bool


def predict_equilibrium(theta: Theta, n_types: int) -> EquilibriumPrediction:
    """Equilibrium integration implied by fitted means, with and without the
    friend-of-friend channel (the difference is the closure contribution)."""
    if n_types < 2:
        raise ValueError("need at least 2 types")
    if theta.n_s + theta.n_d <= 0:
        raise ValueError("phase-1 means must not both be zero")
    k = n_types
    f_inf = (theta.n_d + theta.n_fd) / (
        theta.n_s + theta.n_d + k / (k - 1.0) * theta.n_fd)
    f_no = theta.n_d / (theta.n_s + theta.n_d)
    alpha = theta.alpha
    valid = bool(theta.fof_total > 0 and 1.0 / k < alpha < 1.0)
    return EquilibriumPrediction(f_inf=f_inf, f_inf_no_tc=f_no,
                                 tc_contribution=f_inf - f_no,
                                 alpha=alpha, alpha_valid=valid)


# ---------------------------------------------------------------------------
# Synthetic data from the generative process (growth with per-arrival
# exponential link counts).

def generate_citation_data(theta: Theta, n_nodes: int, seed,
                           n_types: int = 2,
                           years: tuple[int, int] = (2015, 2020),
                           ) -> tuple[list[CitationRecord], JrRun]:
    """Grow a citation-style network whose per-arrival link counts are
    randomized-rounded exponential draws with means ``theta``.

    Returns the records (newest last) and the underlying run; the run's
    ``f_new`` trajectory is the generator's observed integration.
    """
    mean_total = theta.n_s + theta.n_d + theta.fof_total
    # alpha is only a placeholder here: counts come from the draws below
    params = JrParams(n_types=n_types,
                      type_dist=(1.0 / n_types,) * n_types,
                      similar_links=max(1, round(theta.n_s)),
                      dissimilar_links=max(1, round(theta.n_d)),
                      fof_links=max(1, round(theta.fof_total)),
                      alpha=(1.0 + 1e-6) / 2 if n_types == 2
                      else 0.5 * (1.0 / n_types + 1.0))

    def counts_fn(_t, u):
        def exp_draw(mean):
            return randomized_round(-mean * math.log(1.0 - u.u()), u)
        return (exp_draw(theta.n_s), exp_draw(theta.n_d),
                exp_draw(theta.n_fs), exp_draw(theta.n_fd))

    run = grow_network(params, n_nodes, seed, counts_fn=counts_fn,
                       return_graph=True)
    g = run.final_graph
    n0 = g.node_count - n_nodes
    span = years[1] - years[0]
    records = []
    for i in range(g.node_count):
        arrival = max(0, i - n0)
        year = years[0] + (arrival * (span + 1)) // max(1, n_nodes + 1)
        year = min(year, years[1])
        records.append(CitationRecord(
            id=f"p{i:07d}",
            year=year,
            fields_of_study=((f"field_{int(g.node_types[i])}", 1.0),),
            references=tuple(f"p{j:07d}" for j in sorted(g.out_neighbors(i))),
        ))
    return records, run


def cluster_integration(ds: CitationDataset, members: np.ndarray) -> float | None:
    """Observed fraction of cross-field citations within one cluster."""
    member_set = set(int(x) for x in members)
    mono = bi = 0
    for u in members:
        u = int(u)
        for v in ds.refs[u]:
            if int(v) in member_set:
                if ds.node_field[u] == ds.node_field[int(v)]:
                    mono += 1
                else:
                    bi += 1
    total = mono + bi
    return bi / total if total else None


def estimate_pipeline(path, years: tuple[int, int] = (2015, 2020),
                      min_field_share: float = 0.01,
                      cluster_k: int | None = None, seed=0,
                      min_nodes: int = 50) -> dict:
    """Full pipeline: ingest, cluster fields, fit each cluster, predict.

    Returns a JSON-ready report; clusters that cannot be fitted (single
    field, or too few citing papers) are reported with a ``skipped`` reason.
    """
    ds = ingest(path, years=years, min_field_share=min_field_share)
    clustering = cluster_fields(ds, k=cluster_k, seed=seed)
    field_cluster = np.array([clustering.cluster_of[f] for f in ds.field_names])
    report = {
        "input": str(path),
        "years": list(years),
        "min_field_share": min_field_share,
        "n_records": ds.n_records,
        "n_citations": ds.citation_count(),
        "skipped_lines": ds.skipped_lines,
        "major_fields": ds.field_names,
        "n_clusters": clustering.n_clusters,
        "clusters": [],
    }
    for cid in range(clustering.n_clusters):
        fields = [f for f in ds.field_names if clustering.cluster_of[f] == cid]
        fidx = {i for i, f in enumerate(ds.field_names)
                if clustering.cluster_of[f] == cid}
        members = np.flatnonzero(np.isin(ds.node_field, sorted(fidx)))
        entry = {
            "cluster": cid,
            "fields": fields,
            "n_papers": int(members.size),
            "observed_integration": cluster_integration(ds, members),
        }
        if len(fields) < 2:
            entry["skipped"] = "single-field cluster has no cross-type links"
            report["clusters"].append(entry)
            continue
        evidence = build_evidence(ds, members, seed=seed)
        if len(evidence) < min_nodes:
            entry["skipped"] = (f"only {len(evidence)} citing papers "
                                f"(need {min_nodes})")
            report["clusters"].append(entry)
            continue
        fit = fit_theta(evidence, seed=seed)
        pred = predict_equilibrium(fit.theta, len(fields))
        entry.update({
            "n_usable_papers": fit.n_nodes,
            "theta": {
                "n_s": fit.theta.n_s, "n_d": fit.theta.n_d,
                "n_fs": fit.theta.n_fs, "n_fd": fit.theta.n_fd,
            },
            "at_lower_bound": list(fit.at_lower_bound),
            "alpha": pred.alpha,
            "alpha_valid": pred.alpha_valid,
            "f_inf": pred.f_inf,
            "f_inf_no_tc": pred.f_inf_no_tc,
            "tc_contribution": pred.tc_contribution,
            "log_likelihood": fit.log_likelihood,
        })
        report["clusters"].append(entry)
    return report


def write_records(records: list[CitationRecord], path) -> None:
    """Write records in the ingestion JSON-lines shape."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "id": rec.id,
                "year": rec.year,
                "fos": [{"name": n, "w": w} for n, w in rec.fields_of_study],
                "references": list(rec.references),
            }))
            fh.write("\n")
