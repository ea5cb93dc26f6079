"""Discrete optimal transport and entropy toolkit.

Wasserstein-1 distances are computed exactly: by the quantile formula in
one dimension and by a linear program on the dense bipartite cost matrix
otherwise.  No regularized solver is used anywhere in the verification
path.  The module also provides Gaussian quantizations, the
transport-entropy inequality check against the quantized Gaussian, a
Kantorovich-Rubinstein duality harness, and the transport-type inequality
relating tilted path laws to dual penalties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.stats import norm

from .duality import TiltSpec, penalty, tilt
from .generators import BoundFunction, GeneratorSpec, conjugate_of_bound
from .stochastics import BrownianBatch, PathFunctional

__all__ = [
    "DiscreteMeasure",
    "wasserstein1",
    "wasserstein1_coupling",
    "kl_divergence",
    "gaussian_quantization",
    "gaussian_reweight",
    "QUANTIZATION_BUDGET",
    "quantization_budget",
    "check_t1",
    "cone_family",
    "dual_witness_1d",
    "certify_test_function",
    "kantorovich_rubinstein_gap",
    "transport_inequality_check",
]

INF = math.inf
MAX_COST_ENTRIES = 4_000_000


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure: points (N, m) and weights (N,).

    Duplicate support points are merged at construction; weights must be
    nonnegative and sum to one within 1e-12 (they are renormalized after
    the merge to keep the invariant exact).
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights must align")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
        uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
        if uniq.shape[0] != pts.shape[0]:
            merged = np.zeros(uniq.shape[0])
            np.add.at(merged, inverse.ravel(), w)
            pts, w = uniq, merged
        w = w / w.sum()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_1d(cls, points, weights) -> "DiscreteMeasure":
        return cls(np.asarray(points, dtype=float)[:, None], weights)


def _check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    if mu.dimension != nu.dimension:
        raise ValueError("measures live in different ambient dimensions")
    if mu.size * nu.size > MAX_COST_ENTRIES:
        raise ValueError("cost matrix exceeds the memory budget")


def _cdf_at(points: np.ndarray, weights: np.ndarray, query: np.ndarray) -> np.ndarray:
    order = np.argsort(points)
    cum = np.cumsum(weights[order])
    idx = np.searchsorted(points[order], query, side="right")
    return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)


def _w1_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact 1-d value: integral of |F_mu - F_nu| over the support hull."""
    x = mu.points[:, 0]
    y = nu.points[:, 0]
    pts = np.unique(np.concatenate([x, y]))
    if len(pts) == 1:
        return 0.0
    fmu = _cdf_at(x, mu.weights, pts)
    fnu = _cdf_at(y, nu.weights, pts)
    return float(np.sum(np.abs(fmu - fnu)[:-1] * np.diff(pts)))


def _w1_lp(mu: DiscreteMeasure, nu: DiscreteMeasure):
    n, m = mu.size, nu.size
    cost = np.sqrt(((mu.points[:, None, :] - nu.points[None, :, :]) ** 2).sum(-1))
    cols = np.arange(n * m)
    rows = np.concatenate([np.repeat(np.arange(n), m), n + np.tile(np.arange(m), n)])
    a_eq = sparse.coo_matrix(
        (np.ones(2 * n * m), (rows, np.concatenate([cols, cols]))),
        shape=(n + m, n * m)).tocsr()
    b_eq = np.concatenate([mu.weights, nu.weights])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun), res.x.reshape(n, m)


def _quantile_coupling_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """Monotone coupling, optimal for convex costs in one dimension."""
    ix = np.argsort(mu.points[:, 0])
    iy = np.argsort(nu.points[:, 0])
    plan = np.zeros((mu.size, nu.size))
    wi, wj = mu.weights[ix].copy(), nu.weights[iy].copy()
    i = j = 0
    while i < len(wi) and j < len(wj):
        mass = min(wi[i], wj[j])
        plan[ix[i], iy[j]] += mass
        wi[i] -= mass
        wj[j] -= mass
        if wi[i] <= 1e-15:
            i += 1
        if j < len(wj) and wj[j] <= 1e-15:
            j += 1
    return plan


def wasserstein1(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact Wasserstein-1 value with Euclidean ground cost."""
    _check_pair(mu, nu)
    if mu.dimension == 1:
        return _w1_1d(mu, nu)
    value, _ = _w1_lp(mu, nu)
    return value


def wasserstein1_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """Exact value together with an optimal coupling matrix (N, N')."""
    _check_pair(mu, nu)
    if mu.dimension == 1:
        plan = _quantile_coupling_1d(mu, nu)
        cost = np.abs(mu.points[:, 0][:, None] - nu.points[:, 0][None, :])
        return float((plan * cost).sum()), plan
    return _w1_lp(mu, nu)


def kl_divergence(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Kullback-Leibler divergence sum mu_i log(mu_i / nu_i) over shared atoms;
    +inf when mu charges a point nu does not."""
    lookup = {tuple(p): w for p, w in zip(nu.points, nu.weights)}
    total = 0.0
    for p, w in zip(mu.points, mu.weights):
        if w == 0.0:
            continue
        q = lookup.get(tuple(p), 0.0)
        if q == 0.0:
            return INF
        total += w * math.log(w / q)
    return total


# ---------------------------------------------------------------------------
# Gaussian quantization and the transport-entropy check

def gaussian_quantization(n_atoms: int, mean: float = 0.0, sd: float = 1.0,
                          dimension: int = 1) -> DiscreteMeasure:
    """Equal-probability quantile-midpoint quantization of a product Gaussian.

    In one dimension the atoms sit at the (2i+1)/(2N) quantiles; higher
    dimensions (<= 3) use the per-axis product with N atoms per axis.
    """
    if n_atoms < 2:
        raise ValueError("need at least two atoms")
    if dimension < 1 or dimension > 3:
        raise ValueError("product quantization supports dimensions 1..3")
    q = norm.ppf((2 * np.arange(n_atoms) + 1) / (2 * n_atoms)) * sd + mean
    if dimension == 1:
        return DiscreteMeasure.from_1d(q, np.full(n_atoms, 1.0 / n_atoms))
    grids = np.meshgrid(*([q] * dimension), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    n = pts.shape[0]
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


def gaussian_reweight(ref: DiscreteMeasure, mean: float, sd: float) -> DiscreteMeasure:
    """Measure on the reference's atoms with N(mean, sd^2)/N(0,1) density ratio.

    This is the discrete analogue of a measure absolutely continuous with
    respect to the Gaussian reference, so KL against the reference is finite.
    """
    if sd <= 0:
        raise ValueError("sd must be positive")
    x = ref.points[:, 0]
    log_ratio = norm.logpdf(x, loc=mean, scale=sd) - norm.logpdf(x)
    w = ref.weights * np.exp(log_ratio)
    return DiscreteMeasure(ref.points.copy(), w / w.sum())


# empirical quantization slack per reference size: the largest
# |h(W1) - KL| over the Gaussian mean-shift equality family with |mean| <= 1
# on the quantized pair, doubled for safety.  Covers both the one-sided
# transport-entropy direction (which never violates on the corpus) and the
# reproduction of the equality case.  Regenerate with
# tests/oracles.py:quantization_budget_sweep.
QUANTIZATION_BUDGET = {
    64: 3.6e-2,
    128: 2.2e-2,
    256: 1.3e-2,
    512: 7.5e-3,
}


def quantization_budget(n_atoms: int) -> float:
    if n_atoms in QUANTIZATION_BUDGET:
        return QUANTIZATION_BUDGET[n_atoms]
    # conservative fallback, decreasing in the atom count
    return max(2.3 / n_atoms, 1e-3)


@dataclass(frozen=True)
class T1Report:
    w1: float
    kl: float
    h_of_w1: float
    budget: float
    margin: float
    passed: bool


def check_t1(mu: DiscreteMeasure, gauss_ref: DiscreteMeasure,
             h_scale: float = 1.0, budget: Optional[float] = None) -> T1Report:
    """Transport-entropy inequality h(W1(mu, ref)) <= KL(mu | ref) + budget
    with h(x) = x^2 / (2 h_scale), against the quantized Gaussian reference."""
    if h_scale <= 0:
        raise ValueError("h_scale must be positive")
    if budget is None:
        budget = quantization_budget(gauss_ref.size)
    w1 = wasserstein1(mu, gauss_ref)
    kl = kl_divergence(mu, gauss_ref)
    h = w1 * w1 / (2.0 * h_scale)
    margin = kl + budget - h if kl != INF else INF
    return T1Report(w1=w1, kl=kl, h_of_w1=h, budget=budget, margin=margin,
                    passed=margin >= 0)


# ---------------------------------------------------------------------------
# Kantorovich-Rubinstein duality harness

def cone_family(points: np.ndarray):
    """Test functions x -> +/- |x - p| anchored at the given support points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    fam = []
    for p in pts:
        for s in (1.0, -1.0):
            def f(x, _p=p.copy(), _s=s):
                x = np.asarray(x, dtype=float)
                if x.ndim == 1:
                    x = x[:, None]
                return _s * np.sqrt(((x - _p) ** 2).sum(axis=-1))
            fam.append(f)
    return fam


def dual_witness_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Callable:
    """The exact 1-d dual optimizer: piecewise linear with slope
    -sign(F_mu - F_nu) between consecutive support points.  1-Lipschitz by
    construction and attains W1 in one dimension."""
    if mu.dimension != 1 or nu.dimension != 1:
        raise ValueError("the witness construction is one-dimensional")
    x, y = mu.points[:, 0], nu.points[:, 0]
    pts = np.unique(np.concatenate([x, y]))
    fmu = np.array([mu.weights[x <= p].sum() for p in pts])
    fnu = np.array([nu.weights[y <= p].sum() for p in pts])
    slopes = -np.sign(fmu - fnu)[:-1]
    vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(pts))]) \
        if len(pts) > 1 else np.zeros(1)

    def f(t, _pts=pts, _vals=vals):
        t = np.asarray(t, dtype=float)
        flat = t[:, 0] if t.ndim > 1 else t
        return np.interp(flat, _pts, _vals)

    return f


def certify_test_function(f: Callable, support: np.ndarray,
                          tol: float = 1e-9) -> None:
    """Check |f(x) - f(y)| <= |x - y| on all support pairs; raise on breach."""
    pts = np.asarray(support, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    vals = np.asarray(f(pts), dtype=float)
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    breach = np.abs(vals[:, None] - vals[None, :]) - dist
    if breach.max() > tol:
        raise ValueError(f"test function violates 1-Lipschitz by {breach.max():.2e}")


@dataclass(frozen=True)
class KRReport:
    family_sup: float
    w1: float
    gap: float

    @property
    def lower_bound_ok(self) -> bool:
        return self.family_sup <= self.w1 + 1e-9


def kantorovich_rubinstein_gap(mu: DiscreteMeasure, nu: DiscreteMeasure,
                               family: Sequence[Callable]) -> KRReport:
    """Sup of integral differences over a certified 1-Lipschitz family versus
    the exact W1; the sup is always a lower bound, and with a family rich
    enough to contain a dual optimizer the gap closes."""
    union = np.vstack([mu.points, nu.points])
    sup = 0.0  # the zero function is always admissible
    for f in family:
        certify_test_function(f, union)
        val = float(np.sum(mu.weights * np.asarray(f(mu.points), dtype=float))
                    - np.sum(nu.weights * np.asarray(f(nu.points), dtype=float)))
        sup = max(sup, val)
    w1 = wasserstein1(mu, nu)
    return KRReport(family_sup=sup, w1=w1, gap=w1 - sup)


# ---------------------------------------------------------------------------
# transport-type inequality for tilted path laws

@dataclass(frozen=True)
class TransportRow:
    q_summary: str
    w1_estimate: float
    stderr: float
    lstar: float
    alpha: float
    margin: float
    err3: float
    ok: bool


@dataclass(frozen=True)
class TransportReport:
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)


def transport_inequality_check(g: GeneratorSpec, l: BoundFunction,
                               specs: Sequence[TiltSpec],
                               X_family: Sequence[PathFunctional],
                               batch: BrownianBatch,
                               subprobability: bool = False) -> TransportReport:
    """Necessary-condition check of the transport-type inequality
    l*(W1'(Q^q, P)) <= alpha(q).

    The distance is estimated from below by the family supremum of
    importance-weighted mean differences E_Q[X] - E_P[X] (discounted and
    restricted to nonnegative claims in the subprobability variant), so a
    confirmed breach of the inequality is a genuine violation.
    """
    if not specs:
        raise ValueError("need at least one tilt")
    rows = []
    for spec in specs:
        ts = tilt(batch, spec)
        alpha, _ = penalty(g, spec, batch.grid)
        best, best_se = 0.0, 0.0
        for X in X_family:
            if subprobability and not X.nonneg:
                raise ValueError("subprobability variant needs nonnegative claims")
            x = X.evaluate(batch)
            factor = ts.discount if subprobability else 1.0
            diff = factor * ts.density * x - x
            est = float(diff.mean())
            if est > best:
                best = est
                best_se = float(diff.std(ddof=1) / np.sqrt(diff.size))
        lstar = conjugate_of_bound(l, best)
        # delta method through l*: d/dr = r / (2 quad)
        deriv = best / (2.0 * l.quad_coef) if l.quad_coef > 0 else 0.0
        err3 = 3.0 * abs(deriv) * best_se
        margin = (alpha - lstar) if alpha != INF else INF
        ok = bool(margin >= -err3) if alpha != INF else True
        rows.append(TransportRow(_fmt_spec(spec), best, best_se, lstar,
                                 alpha, margin, err3, ok))
    return TransportReport(rows=tuple(rows))


def _fmt_spec(spec: TiltSpec) -> str:
    qlo, qhi = float(spec.q.min()), float(spec.q.max())
    return f"q={qlo:g}" if qlo == qhi else f"q in [{qlo:g},{qhi:g}]"
