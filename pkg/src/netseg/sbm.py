"""Stochastic block model: sampling, closed-form counts, effect predicates,
homophily bounds, and eigenvector-centrality analysis.

The closed forms come in two flavors.  The *leading-order* expressions drop
O(n)/O(n^2) terms and are what the large-n predicates use; the *exact*
variants keep the binomial coefficients and are the right comparison at desk
scale.  Both are exposed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParamsError, NoWedgeError, NonConvergenceError
from .graph import TypedGraph
from .mc import sign_with_tol
from .rng import make_rng

RATIO_TOL = 1e-12  # equality tolerance for compared ratios in effect predicates


@dataclass(frozen=True)
class SbmParams:
    """Group sizes plus within-type (p) and cross-type (q) edge probabilities."""

    group_sizes: tuple[int, ...]
    p: float
    q: float

    def __post_init__(self):
        if len(self.group_sizes) < 2:
            raise ValueError("need at least 2 groups")
        if any(int(s) != s or s <= 0 for s in self.group_sizes):
            raise ValueError("group sizes must be positive integers")
        object.__setattr__(self, "group_sizes", tuple(int(s) for s in self.group_sizes))
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError("p and q must lie in [0, 1]")

    @property
    def K(self) -> int:
        return len(self.group_sizes)

    @property
    def n(self) -> int:
        return sum(self.group_sizes)

    def node_types(self) -> np.ndarray:
        return np.repeat(np.arange(self.K), self.group_sizes)


@dataclass(frozen=True)
class MomentSums:
    """Group-size power sums and the derived combinations used everywhere.

    n = sum n_k, m2 = sum n_k^2, m3 = sum n_k^3,
    A = n^2 - m2, B = n*m2 - m3, C = m3*A - m2*B.
    All are nonnegative for positive sizes.  Kept as Python ints so that
    identities (e.g. m2*B == m3*A for balanced groups) are exact.
    """

    n: int
    m2: int
    m3: int
    A: int
    B: int
    C: int

    @classmethod
    def from_sizes(cls, group_sizes) -> "MomentSums":
        sizes = [int(s) for s in group_sizes]
        if any(s <= 0 for s in sizes):
            raise ValueError("group sizes must be positive")
        n = sum(sizes)
        m2 = sum(s * s for s in sizes)
        m3 = sum(s * s * s for s in sizes)
        a = n * n - m2
        b = n * m2 - m3
        return cls(n=n, m2=m2, m3=m3, A=a, B=b, C=m3 * a - m2 * b)


def moment_inequalities(group_sizes) -> list[bool]:
    """The five power-sum inequalities, evaluated in exact integer arithmetic.

    [n^2 >= m2, n*m2 >= m3, n*m3 >= m2^2, 2*m2^2 >= n*m3,
     2*n*m2^2 >= n^2*m3 + m2*m3]
    """
    ms = MomentSums.from_sizes(group_sizes)
    n, m2, m3 = ms.n, ms.m2, ms.m3
    return [
        n * n >= m2,
        n * m2 >= m3,
        n * m3 >= m2 * m2,
        2 * m2 * m2 >= n * m3,
        2 * n * m2 * m2 >= n * n * m3 + m2 * m3,
    ]


@dataclass(frozen=True)
class ExpectedCounts:
    """Expected mono/bi edges (e), missing edges (o), and wedges (w)."""

    e_m: float
    e_b: float
    o_m: float
    o_b: float
    w_m: float
    w_b: float

    @property
    def edge_total(self) -> float:
        return self.e_m + self.e_b

    @property
    def wedge_total(self) -> float:
        return self.w_m + self.w_b


def expected_counts(params: SbmParams) -> ExpectedCounts:
    """Leading-order expected counts (O(n) / O(n^2) corrections dropped)."""
    ms = MomentSums.from_sizes(params.group_sizes)
    p, q = params.p, params.q
    n, m2, m3 = float(ms.n), float(ms.m2), float(ms.m3)
    nm2_m3 = n * m2 - m3
    e_m = 0.5 * p * m2
    e_b = 0.5 * q * (n * n - m2)
    o_m = 0.5 * (1 - p) * m2
    o_b = 0.5 * (1 - q) * (n * n - m2)
    w_m = 0.5 * p * p * (1 - p) * m3 + 0.5 * q * q * (1 - p) * nm2_m3
    w_b = p * q * (1 - q) * nm2_m3 \
        + 0.5 * q * q * (1 - q) * (n ** 3 + 2 * m3 - 3 * n * m2)
    return ExpectedCounts(e_m, e_b, o_m, o_b, w_m, w_b)


def expected_counts_exact(params: SbmParams) -> ExpectedCounts:
    """Finite-n expected counts with the binomial coefficients kept."""
    sizes = params.group_sizes
    p, q = params.p, params.q
    n = sum(sizes)
    pair_m = sum(math.comb(s, 2) for s in sizes)
    pair_b = sum(sk * sl for i, sk in enumerate(sizes) for sl in sizes[i + 1:])
    e_m = p * pair_m
    e_b = q * pair_b
    o_m = (1 - p) * pair_m
    o_b = (1 - q) * pair_b
    # Wedge (i, h, j): mediator h, outer pair {i, j} unlinked.
    w_m = (1 - p) * sum(
        math.comb(s, 2) * ((s - 2) * p * p + (n - s) * q * q) for s in sizes)
    w_b = p * q * (1 - q) * sum(s * (s - 1) * (n - s) for s in sizes) \
        + q * q * (1 - q) * sum(sk * sl * (n - sk - sl)
                                for i, sk in enumerate(sizes)
                                for sl in sizes[i + 1:])
    return ExpectedCounts(e_m, e_b, o_m, o_b, w_m, w_b)


def absolute_effect_sign(params: SbmParams) -> str:
    """Sign of triadic closure's absolute effect on expected integration.

    Positive iff w_b/w_m > e_b/e_m on the leading-order expected counts,
    which reduces to sign(p - q) in the homophily-relevant regime.
    """
    c = expected_counts(params)
    if c.e_m + c.e_b == 0:
        raise DegenerateParamsError("p = q = 0: the model has no edges")
    if c.w_m + c.w_b == 0:
        raise NoWedgeError("expected wedge count is zero (complete or empty model)")
    if c.w_m > 0 and c.e_m > 0:
        return sign_with_tol(c.w_b / c.w_m - c.e_b / c.e_m, RATIO_TOL)
    # A zero denominator: compare cross products on the same scale.
    lhs, rhs = c.w_b * c.e_m, c.e_b * c.w_m
    return sign_with_tol(lhs - rhs, RATIO_TOL * max(1.0, lhs, rhs))


@dataclass(frozen=True)
class RelativeBounds:
    """Band [lower, upper] on p/q for a nonnegative relative effect.

    ``l_star`` is the gamma -> 1 lower bound; at gamma = 1 the band collapses
    to [l_star, 1].
    """

    lower: float
    upper: float
    l_star: float


def relative_bounds(params: SbmParams, gamma: float) -> RelativeBounds:
    """Roots u(gamma) >= 1 >= l(gamma) of the relative-effect quadratic.

    Closing a random wedge beats adding a gamma-homophilous random edge
    (in expectation, leading order) iff l(gamma) <= p/q <= u(gamma).
    """
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    ms = MomentSums.from_sizes(params.group_sizes)
    m2b = ms.m2 * ms.B
    m3a = ms.m3 * ms.A
    if m3a == 0:
        raise DegenerateParamsError("degenerate grouping: m3 * A = 0")
    # int/int division is correctly rounded: l_star is exactly 1.0 whenever
    # 2*m2*B - m3*A == m3*A (balanced groups)
    l_star = (2 * m2b - m3a) / m3a
    disc = (gamma * m2b - m3a) ** 2 \
        + (gamma - 1.0) * ms.n * ms.m2 * ms.m3 * float(ms.A) ** 2
    root = math.sqrt(disc)
    upper = (gamma * m2b + root) / m3a
    lower = (gamma * m2b - root) / m3a
    return RelativeBounds(lower=lower, upper=upper, l_star=l_star)


@dataclass(frozen=True)
class CentralityReport:
    """Two-group eigenvector-centrality ratio and triadic-closure correction.

    ``ratio_before`` is the minority/majority mean-centrality ratio of the
    expected network; ``delta_tc`` the first-order change from closing a
    random wedge; ``gamma_threshold`` the homophily weight above which wedge
    closure beats the gamma-edge baseline for this ratio.
    """

    beta: float
    ratio_before: float
    delta_tc: float
    gamma_threshold: float


def centrality_analysis(params: SbmParams, baseline_gamma: float = 1.0) -> CentralityReport:
    if params.K != 2:
        raise ValueError("centrality analysis is defined for exactly 2 groups")
    if baseline_gamma < 1:
        raise ValueError("baseline gamma must be >= 1")
    n1, n2 = params.group_sizes
    if n1 < n2:
        raise ValueError("order groups so that n1 >= n2 (majority first)")
    p, q = params.p, params.q
    if q <= 0.0 or q >= 1.0:
        raise DegenerateParamsError("centrality threshold needs 0 < q < 1")
    n = n1 + n2
    beta = math.sqrt((n1 - n2) ** 2 * p * p + 4 * n1 * n2 * q * q)
    ratio_before = (beta - (n1 - n2) * p) / (2 * n2 * q)
    w = expected_counts_exact(params).wedge_total
    if w <= 0:
        raise DegenerateParamsError("expected wedge count is zero")
    delta_tc = (n / w) * ((n1 - n2) / n2) * (p - q) * p * p \
        * (beta - (n1 - n2) * p) / (2 * q * beta)
    cubes = n1 ** 3 + n2 ** 3
    c_num = cubes * p * p + n * n1 * n2 * q * (2 * p + q)
    c_den = cubes * p * p + n * n1 * n2 * (
        p * (2 * q + p) + (1 - p) / (1 - q) * (q * q - p * p))
    if c_den <= 0:
        raise DegenerateParamsError("degenerate probability regime in c(p, q)")
    if q == 0:
        raise DegenerateParamsError("threshold undefined at q = 0")
    gamma_threshold = (p / q) * (c_num / c_den)
    return CentralityReport(beta=beta, ratio_before=ratio_before,
                            delta_tc=delta_tc, gamma_threshold=gamma_threshold)


def expected_adjacency(params: SbmParams) -> np.ndarray:
    """Dense expected adjacency: p/q blocks with a zero diagonal."""
    types = params.node_types()
    same = types[:, None] == types[None, :]
    a = np.where(same, params.p, params.q)
    np.fill_diagonal(a, 0.0)
    return a


def power_iteration(a: np.ndarray, tol: float = 1e-10,
                    max_iter: int = 100_000) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a symmetric nonnegative matrix.

    Stops when ||A v - lam v||_2 <= tol * max(1, lam); raises
    ``NonConvergenceError`` if the budget runs out (no dominant eigenvalue).
    """
    n = a.shape[0]
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        w = a @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise NonConvergenceError("matrix annihilated the iterate")
        v_new = w / norm
        lam = float(v_new @ (a @ v_new))
        if np.linalg.norm(a @ v_new - lam * v_new) <= tol * max(1.0, abs(lam)):
            return lam, v_new
        v = v_new
    raise NonConvergenceError("power iteration found no dominant eigenvalue")


def measured_centrality_ratio(g: TypedGraph) -> float:
    """Mean eigenvector centrality of group 1 over group 0 on a sampled graph."""
    if g.K != 2:
        raise ValueError("measured ratio is defined for 2-type graphs")
    a = g.adjacency_matrix(dtype=np.float64)
    _, v = power_iteration(a)
    if v.sum() < 0:
        v = -v
    types = g.node_types
    m0 = float(v[types == 0].mean())
    m1 = float(v[types == 1].mean())
    return m1 / m0


# ---------------------------------------------------------------------------
# Sampling and Monte Carlo experiment kernels.

def sample_sbm_matrix(params: SbmParams, rng) -> np.ndarray:
    """Boolean adjacency of one SBM draw (undirected, simple)."""
    n = params.n
    prob = expected_adjacency(params)
    r = rng.random((n, n))
    a = np.triu(r < prob, 1)
    return a | a.T


def sample_sbm(params: SbmParams, seed) -> TypedGraph:
    """One SBM draw as a TypedGraph."""
    rng = make_rng(seed)
    a = sample_sbm_matrix(params, rng)
    src, dst = np.nonzero(np.triu(a, 1))
    return TypedGraph(params.node_types(), zip(src.tolist(), dst.tolist()),
                      directed=False, K=params.K)


def _edge_counts_matrix(a: np.ndarray, same_triu: np.ndarray,
                        bi_triu: np.ndarray) -> tuple[int, int]:
    return int(np.count_nonzero(a & same_triu)), int(np.count_nonzero(a & bi_triu))


def _sample_wedge_color_matrix(a: np.ndarray, types: np.ndarray, rng) -> bool:
    """True if a uniformly drawn wedge is bichromatic.

    Same rejection scheme as ``graph.sample_wedge``: mediator by neighbor-pair
    weight, then accept an unlinked uniform neighbor pair.
    """
    degs = a.sum(axis=1)
    weights = degs * (degs - 1) / 2.0
    total = weights.sum()
    if total <= 0:
        raise NoWedgeError("no wedge in sampled graph")
    cum = np.cumsum(weights)
    for _ in range(512):
        h = int(np.searchsorted(cum, rng.random() * total, side="right"))
        nbrs = np.flatnonzero(a[h])
        d = nbrs.size
        ia = int(rng.integers(d))
        ib = int(rng.integers(d - 1))
        if ib >= ia:
            ib += 1
        i, j = int(nbrs[ia]), int(nbrs[ib])
        if not a[i, j]:
            return bool(types[i] != types[j])
    # Rejection stalled (very dense graph): enumerate via common-neighbor counts.
    af = a.astype(np.float32)
    cn = af @ af
    openm = (~a) & ~np.eye(a.shape[0], dtype=bool)
    wsum = cn * np.triu(openm, 1)
    flat = wsum.ravel()
    tot = flat.sum()
    if tot <= 0:
        raise NoWedgeError("no wedge in sampled graph")
    idx = int(rng.choice(flat.size, p=flat / tot))
    i, j = divmod(idx, a.shape[0])
    return bool(types[i] != types[j])


def closure_effect_samples(params: SbmParams, n_reps: int, seed) -> np.ndarray:
    """Integration change from closing one random wedge, per sampled graph."""
    rng = make_rng(seed)
    types = params.node_types()
    same = types[:, None] == types[None, :]
    triu = np.triu(np.ones((params.n, params.n), dtype=bool), 1)
    same_triu = same & triu
    bi_triu = ~same & triu
    out = np.empty(n_reps)
    for r in range(n_reps):
        a = sample_sbm_matrix(params, rng)
        e_m, e_b = _edge_counts_matrix(a, same_triu, bi_triu)
        e = e_m + e_b
        bi = _sample_wedge_color_matrix(a, types, rng)
        out[r] = (e_b + bi) / (e + 1) - e_b / e
    return out


def relative_effect_samples(params: SbmParams, gamma: float, n_reps: int,
                            seed) -> np.ndarray:
    """Paired integration gain of wedge closure minus a gamma-edge addition.

    Both interventions are drawn on the same sampled graph, so the difference
    reduces to (bi_wedge - bi_edge) / (E + 1) per replicate.
    """
    rng = make_rng(seed)
    types = params.node_types()
    same = types[:, None] == types[None, :]
    triu = np.triu(np.ones((params.n, params.n), dtype=bool), 1)
    same_triu = same & triu
    bi_triu = ~same & triu
    pair_m = int(same_triu.sum())
    pair_b = int(bi_triu.sum())
    out = np.empty(n_reps)
    for r in range(n_reps):
        a = sample_sbm_matrix(params, rng)
        e_m, e_b = _edge_counts_matrix(a, same_triu, bi_triu)
        e = e_m + e_b
        bi_w = _sample_wedge_color_matrix(a, types, rng)
        o_m = pair_m - e_m
        o_b = pair_b - e_b
        w_mono = gamma * o_m
        bi_e = rng.random() * (w_mono + o_b) >= w_mono
        out[r] = (int(bi_w) - int(bi_e)) / (e + 1)
    return out
