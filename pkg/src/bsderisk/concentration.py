"""Risk-profile computation and the inequality checkers.

The central object is the risk profile lambda -> value(lambda * X), checked
cell by cell against the affine-plus-convex bound lambda * E[X] + l(lambda).
Routing is strict: each bound variant admits only the claim classes and
generator kinds for which the corresponding result holds, and positive
claims are required whenever the generator depends on y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .bsde import RiskMeasureHandle
from .generators import (BoundFunction, GeneratorSpec, bound_function,
                         cap_generator, conjugate_of_bound)
from .reports import (PASS, bootstrap_median_interval, combine_verdicts,
                      verdict, wilson_interval)
from .stochastics import BrownianBatch, PathFunctional, block_average

__all__ = [
    "VARIANTS",
    "check_routing",
    "default_bound",
    "RiskProfile",
    "profile",
    "deviation_check",
    "dimension_free_check",
    "pde_check",
    "BIAS_COEFFICIENT",
]

INF = math.inf

# bias budget delta_n = C * 2^{-n/2} * max(1, |value|); C calibrated by
# comparing the capped-regression engine against the entropic closed form
# (tests/test_bsde.py::test_bias_budget_calibration)
BIAS_COEFFICIENT = 0.8

# which claim classes and generator kinds each bound variant admits
VARIANTS = {
    "quadratic-growth": {
        "kinds": ("entropic", "quadratic"),
        "tags": ("levels", "levels_pos"),
    },
    "kappa-domination": {
        "kinds": ("lipschitz",),
        "tags": ("path",),
    },
    "capped-superquadratic": {
        "kinds": ("superquadratic", "capped"),
        "tags": ("increments", "increments_pos"),
    },
}


def check_routing(variant: str, g: GeneratorSpec, X: PathFunctional) -> None:
    """Reject (variant, generator, claim) combinations outside the theory."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown bound variant {variant!r}")
    rules = VARIANTS[variant]
    if g.kind not in rules["kinds"]:
        raise ValueError(f"generator kind {g.kind!r} not admitted by {variant!r}")
    if X.class_tag not in rules["tags"]:
        raise ValueError(
            f"claim class {X.class_tag!r} not admitted by {variant!r}")
    if g.depends_on_y and not X.nonneg:
        raise ValueError(
            f"{variant!r} with a y-dependent generator requires positive claims")


def default_bound(variant: str, g: GeneratorSpec, horizon: float) -> BoundFunction:
    """The bound function each variant prescribes for a given generator."""
    if variant == "quadratic-growth":
        gr = g.growth
        if not math.isfinite(gr.c):
            raise ValueError("quadratic-growth bound needs a finite envelope")
        return bound_function(variant, horizon=horizon, a=gr.a, b=gr.b, c=gr.c)
    if variant == "kappa-domination":
        return bound_function(variant, horizon=horizon,
                              kappa=float(g.params["kappa"]))
    if variant == "capped-superquadratic":
        capped = g if g.kind == "capped" else cap_generator(g, horizon)
        return bound_function(variant, horizon=horizon,
                              b=float(capped.params["b"]),
                              c=float(capped.params["c"]))
    raise ValueError(f"unknown bound variant {variant!r}")


@dataclass(frozen=True)
class ProfileRow:
    lam: float
    value: float
    stderr: float
    bound: float
    margin: float
    err3: float
    verdict: str


@dataclass(frozen=True)
class RiskProfile:
    claim: str
    generator: str
    variant: str
    rows: tuple
    mean_claim: float
    mean_stderr: float
    convexity_ok: bool

    @property
    def verdict(self) -> str:
        return combine_verdicts(r.verdict for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


def _bias(scheme: str, grid, value: float, coeff: float) -> float:
    if scheme == "entropic":
        return 0.0
    return coeff * 2.0 ** (-grid.levels / 2.0) * max(1.0, abs(value))


def profile(handle: RiskMeasureHandle, X: PathFunctional, lambdas: Sequence[float],
            batch: BrownianBatch, l: BoundFunction, variant: str,
            bias_coefficient: float = BIAS_COEFFICIENT,
            second_batch: Optional[Callable[[], BrownianBatch]] = None
            ) -> RiskProfile:
    """Fill the liquidity risk profile and check value <= bound per lambda.

    ``second_batch`` lazily provides an independent batch; it is consulted
    only to confirm 5-sigma breaches before a VIOLATION verdict.
    """
    check_routing(variant, handle.generator, X)
    lambdas = [float(v) for v in lambdas]
    if any(v < 0 for v in lambdas) or sorted(lambdas) != lambdas:
        raise ValueError("lambdas must be an increasing nonnegative grid")
    if lambdas[0] != 0.0:
        lambdas = [0.0] + lambdas
    x = X.evaluate(batch)
    mean_x = float(x.mean())
    se_x = float(x.std(ddof=1) / math.sqrt(x.size))
    scheme = "entropic" if handle.generator.kind == "entropic" else "regression"
    rows = []
    cached_second = {}

    def margin_at(lam, b):
        v, se = handle.value(X, lam, b)
        xx = X.evaluate(b)
        bnd = lam * float(xx.mean()) + float(l(lam))
        sigma = se + lam * float(xx.std(ddof=1) / math.sqrt(xx.size))
        return bnd - v, sigma, v, se

    for lam in lambdas:
        value, se = handle.value(X, lam, batch)
        bnd = lam * mean_x + float(l(lam))
        margin = bnd - value
        sigma = se + lam * se_x
        bias = _bias(scheme, batch.grid, value, bias_coefficient)
        recheck = None
        if second_batch is not None:
            def recheck(_lam=lam):
                return margin_at(_lam, _second(cached_second, second_batch))[0]
        vd = verdict(margin, sigma, bias, recheck=recheck)
        rows.append(ProfileRow(lam, value, se, bnd, margin, 3 * sigma + bias, vd))
    vals = np.array([r.value for r in rows])
    errs = np.array([r.err3 for r in rows])
    lams = np.array([r.lam for r in rows])
    convexity_ok = _discrete_convexity(lams, vals, errs)
    return RiskProfile(claim=X.name, generator=handle.generator.describe(),
                       variant=variant, rows=tuple(rows), mean_claim=mean_x,
                       mean_stderr=se_x, convexity_ok=convexity_ok)


def _second(cache, factory):
    if "b" not in cache:
        cache["b"] = factory()
    return cache["b"]


def _discrete_convexity(lams, vals, errs) -> bool:
    """Second differences of the profile must not be significantly negative."""
    ok = True
    for i in range(1, len(lams) - 1):
        h1 = lams[i] - lams[i - 1]
        h2 = lams[i + 1] - lams[i]
        if h1 <= 0 or h2 <= 0:
            continue
        second = (vals[i + 1] - vals[i]) / h2 - (vals[i] - vals[i - 1]) / h1
        tol = (errs[i - 1] + errs[i] + errs[i + 1]) / min(h1, h2)
        ok = ok and (second >= -tol)
    return ok


# ---------------------------------------------------------------------------
# deviation bound for the entropic-type tail estimate

@dataclass(frozen=True)
class DeviationRow:
    r: float
    tail: float
    tail_lo: float
    tail_hi: float
    bound: float
    verdict: str


@dataclass(frozen=True)
class DeviationReport:
    median: float
    median_interval: tuple
    rows: tuple

    @property
    def verdict(self) -> str:
        return combine_verdicts(r.verdict for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


def deviation_bound_value(l: BoundFunction, r: float) -> float:
    """exp(-l*(r - (l*)^{-1}(log 2))), clamped to the vacuous value 1 when
    the shifted argument leaves the increasing branch."""
    if l.quad_coef <= 0:
        raise ValueError("deviation bound needs a positive quadratic part")
    arg = r - l.conjugate_inverse(math.log(2.0))
    if arg <= 0:
        return 1.0
    return math.exp(-max(conjugate_of_bound(l, arg), 0.0))


def deviation_check(batch: BrownianBatch, X: PathFunctional, l: BoundFunction,
                    r_grid: Sequence[float],
                    second_batch: Optional[Callable[[], BrownianBatch]] = None
                    ) -> DeviationReport:
    """Empirical tails P(X > m_X + r) versus the deviation bound.

    The sample-median uncertainty (bootstrap) is folded in by evaluating the
    tail at the upper end of the median interval; a row fails only when the
    Wilson lower confidence bound still exceeds the bound value.
    """
    x = X.evaluate(batch)
    med = float(np.median(x))
    lo_med, hi_med = bootstrap_median_interval(x, seed=batch.seed)
    m = x.size
    rows = []
    for r in r_grid:
        if r <= 0:
            raise ValueError("r must be positive")
        bound = deviation_bound_value(l, r)
        k = int(np.sum(x > hi_med + r))
        tail = k / m
        lo, hi = wilson_interval(k, m)
        if lo <= bound:
            vd = PASS
        else:
            vd = "VIOLATION"
            if second_batch is not None:
                b2 = second_batch()
                x2 = X.evaluate(b2)
                _, hi2 = bootstrap_median_interval(x2, seed=b2.seed)
                k2 = int(np.sum(x2 > hi2 + r))
                lo2, _ = wilson_interval(k2, x2.size)
                if lo2 <= bound:
                    vd = "STATISTICALLY-INCONCLUSIVE"
        rows.append(DeviationRow(float(r), tail, lo, hi, bound, vd))
    return DeviationReport(median=med, median_interval=(lo_med, hi_med),
                           rows=tuple(rows))


# ---------------------------------------------------------------------------
# dimension-free averaging bound

@dataclass(frozen=True)
class DimFreeRow:
    n: int
    value: float
    stderr: float
    bound: float
    margin: float
    verdict: str


@dataclass(frozen=True)
class DimFreeReport:
    lam: float
    rows: tuple
    bound_constant: bool

    @property
    def verdict(self) -> str:
        return combine_verdicts(r.verdict for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


def dimension_free_check(handle: RiskMeasureHandle,
                         template: Callable[[int], PathFunctional],
                         n_list: Sequence[int], lam: float, l: BoundFunction,
                         batch: BrownianBatch, block_dim: int = 1,
                         bias_coefficient: float = BIAS_COEFFICIENT,
                         second_batch=None) -> DimFreeReport:
    """Check value(lam * average of n i.i.d. block claims) <= lam E[X_1] + l(lam)
    for each n; the bound column is the same number in every row."""
    if max(n_list) * block_dim > batch.dimension:
        raise ValueError("batch carries too few coordinates for the blocks")
    # pooled estimate of E[X_1] over all available blocks
    n_max = max(n_list)
    pooled = block_average(template, n_max, block_dim)
    per_block = pooled.evaluate(batch)
    x1 = template(0).evaluate(batch)
    mean1 = float(per_block.mean())
    se1 = float(x1.std(ddof=1) / math.sqrt(x1.size * n_max))
    bnd = lam * mean1 + float(l(lam))
    scheme = "entropic" if handle.generator.kind == "entropic" else "regression"
    rows = []
    for n in sorted(n_list):
        claim = block_average(template, n, block_dim)
        value, se = handle.value(claim, lam, batch)
        margin = bnd - value
        sigma = se + lam * se1
        bias = _bias(scheme, batch.grid, value, bias_coefficient)
        vd = verdict(margin, sigma, bias)
        rows.append(DimFreeRow(n, value, se, bnd, margin, vd))
    return DimFreeReport(lam=lam, rows=tuple(rows), bound_constant=True)


# ---------------------------------------------------------------------------
# finite-difference check of the semilinear PDE characterization

@dataclass(frozen=True)
class PdeRow:
    lam: float
    v_value: float
    budget: float
    verdict: str


@dataclass(frozen=True)
class PdeReport:
    s: float
    x: float
    rows: tuple

    @property
    def verdict(self) -> str:
        return combine_verdicts(r.verdict for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


def _fd_solve(g_of_p: Callable, terminal: np.ndarray, xs: np.ndarray,
              t_span: float, dt: float) -> np.ndarray:
    """Explicit backward Euler for u_t + 0.5 u_xx + g(u_x) = 0 on a line
    segment with linear-extrapolation boundaries."""
    dx = xs[1] - xs[0]
    n_steps = max(1, int(round(t_span / dt)))
    dt = t_span / n_steps
    u = terminal.astype(float).copy()
    for _ in range(n_steps):
        ghost_lo = 2 * u[0] - u[1]
        ghost_hi = 2 * u[-1] - u[-2]
        ext = np.concatenate([[ghost_lo], u, [ghost_hi]])
        lap = (ext[2:] - 2 * ext[1:-1] + ext[:-2]) / (dx * dx)
        grad = (ext[2:] - ext[:-2]) / (2 * dx)
        u = u + dt * (0.5 * lap + g_of_p(grad))
    return u


def pde_check(g: GeneratorSpec, l: BoundFunction, f: Callable, s: float,
              x: float, lambda_grid: Sequence[float], horizon: float,
              nx: int = 241, courant: float = 0.4,
              nt: Optional[int] = None) -> PdeReport:
    """Solve the value PDE for v(t, y) = value(lam f(W_T^{t,y})
    - lam E[f(W_T^{t,y})] - l(lam)) by explicit finite differences and
    report v(s, x) per lambda; the inequality holds when v stays below the
    Richardson grid budget.

    v is assembled as u - m - l(lam) where u solves the semilinear equation
    with terminal lam * f and m the heat equation with the same terminal
    data (so leading discretization errors cancel).
    """
    if g.depends_on_y:
        raise ValueError("the PDE characterization needs a z-only generator")
    if not 0 <= s < horizon:
        raise ValueError("need 0 <= s < horizon")
    span = horizon - s
    radius = 6.0 * math.sqrt(horizon)
    lam_max = max(lambda_grid) if len(lambda_grid) else 1.0

    def run(nx_run, lam):
        xs = np.linspace(x - radius, x + radius, nx_run)
        dx = xs[1] - xs[0]
        # gradient range ~ lam (1-Lipschitz terminal); generator slope there
        probe = np.array([max(1.0, lam)])
        g_at = np.asarray(g.evaluate(0.0, 0.0, probe[:, None])).reshape(-1)[0]
        slope = float(g_at) / max(1.0, lam) + 1.0
        dt_stable = courant * dx * dx / (1.0 + slope * dx)
        if nt is not None:
            dt_req = span / nt
            if dt_req > dt_stable:
                raise ValueError("requested time step violates the CFL bound")
            dt_run = dt_req
        else:
            dt_run = dt_stable
        term = lam * np.asarray(f(xs), dtype=float)

        def g_of_p(p):
            return g.evaluate(0.0, 0.0, p[:, None])

        u = _fd_solve(g_of_p, term, xs, span, dt_run)
        mheat = _fd_solve(lambda p: 0.0, term, xs, span, dt_run)
        idx = int(np.argmin(np.abs(xs - x)))
        return float(u[idx] - mheat[idx] - float(l(lam)))

    rows = []
    for lam in lambda_grid:
        v_coarse = run(nx, lam)
        v_fine = run(2 * nx - 1, lam)
        budget = abs(v_fine - v_coarse) + 1e-6
        vd = PASS if v_fine <= budget else "VIOLATION"
        rows.append(PdeRow(float(lam), v_fine, budget, vd))
    return PdeReport(s=s, x=x, rows=tuple(rows))
