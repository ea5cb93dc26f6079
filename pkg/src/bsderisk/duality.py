"""Girsanov tilts, discount factors, relative entropy and dual penalties.

A tilt is a deterministic piecewise-constant drift q (per grid cell, per
coordinate) together with a nonnegative piecewise-constant rate beta.  The
induced density is the stochastic exponential of the drift; deterministic
tilts keep it bounded and make the penalty an exact time integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .generators import GeneratorSpec
from .stochastics import BrownianBatch, PathFunctional, TimeGrid

__all__ = [
    "TiltSpec",
    "TiltedSample",
    "constant_tilt",
    "piecewise_tilt",
    "tilt",
    "relative_entropy",
    "penalty",
    "dual_gap",
    "entropy_penalty_margin",
    "best_constant_tilt",
]

INF = math.inf


@dataclass(frozen=True)
class TiltSpec:
    """Piecewise-constant drift q (n_cells, d) and rate beta (n_cells,) >= 0.

    Deterministic piecewise-constant drifts always induce a bounded density,
    so the boundedness flag is set at construction.
    """

    q: np.ndarray
    beta: np.ndarray
    bound_check: bool = True

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if q.shape[0] != beta.shape[0]:
            raise ValueError("q and beta must share the cell axis")
        if not np.all(np.isfinite(q)):
            raise ValueError("drift values must be finite")
        if np.any(beta < 0) or not np.all(np.isfinite(beta)):
            raise ValueError("beta must be nonnegative and finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "beta", beta)

    @property
    def n_cells(self) -> int:
        return self.q.shape[0]

    @property
    def dimension(self) -> int:
        return self.q.shape[1]


def constant_tilt(grid: TimeGrid, d: int, q_value, beta_value=0.0) -> TiltSpec:
    """Tilt with the same drift vector and rate on every cell."""
    qv = np.broadcast_to(np.asarray(q_value, dtype=float), (d,))
    q = np.tile(qv, (grid.n_cells, 1))
    beta = np.full(grid.n_cells, float(beta_value))
    return TiltSpec(q=q, beta=beta)


def piecewise_tilt(grid: TimeGrid, d: int, q_pieces: Sequence, beta_pieces=None) -> TiltSpec:
    """Tilt from a handful of equal-length pieces spread over the grid."""
    n = grid.n_cells
    pieces = [np.broadcast_to(np.asarray(p, dtype=float), (d,)) for p in q_pieces]
    k = len(pieces)
    idx = np.minimum((np.arange(n) * k) // n, k - 1)
    q = np.stack([pieces[i] for i in idx])
    if beta_pieces is None:
        beta = np.zeros(n)
    else:
        bp = [float(b) for b in beta_pieces]
        bidx = np.minimum((np.arange(n) * len(bp)) // n, len(bp) - 1)
        beta = np.array([bp[i] for i in bidx])
    return TiltSpec(q=q, beta=beta)


@dataclass(frozen=True)
class TiltedSample:
    """Per-path density values of a tilt on a batch plus the discount factor."""

    density: np.ndarray
    log_density: np.ndarray
    discount: float
    spec: TiltSpec
    grid: TimeGrid

    @property
    def entropy_estimate(self):
        """Plug-in estimate of E[M log M] with its Monte Carlo stderr."""
        mlogm = self.density * self.log_density
        m = mlogm.size
        return float(mlogm.mean()), float(mlogm.std(ddof=1) / np.sqrt(m))

    def closed_form_entropy(self) -> float:
        """(1/2) int |q|^2 dt, the Girsanov value for deterministic drifts."""
        return 0.5 * float((self.spec.q ** 2).sum()) * self.grid.step


def tilt(batch: BrownianBatch, spec: TiltSpec) -> TiltedSample:
    """Compute the density exp(sum q.dW - 1/2 sum |q|^2 dt) per path and the
    deterministic discount exp(-int beta dt)."""
    if spec.n_cells != batch.grid.n_cells or spec.dimension != batch.dimension:
        raise ValueError("tilt dimensions do not match the batch")
    dt = batch.grid.step
    logm = np.einsum("mnd,nd->m", batch.increments, spec.q) \
        - 0.5 * float((spec.q ** 2).sum()) * dt
    density = np.exp(logm)
    discount = float(np.exp(-spec.beta.sum() * dt))
    return TiltedSample(density=density, log_density=logm, discount=discount,
                        spec=spec, grid=batch.grid)


def relative_entropy(ts: TiltedSample):
    """Plug-in estimate of the relative entropy E[M log M] and its stderr,
    together with the closed-form value (1/2) int |q|^2 dt."""
    value, stderr = ts.entropy_estimate
    return value, stderr, ts.closed_form_entropy()


def _discount_weights(spec: TiltSpec, grid: TimeGrid) -> np.ndarray:
    """Exact per-cell integrals int_cell exp(-int_0^u beta) du."""
    dt = grid.step
    cum = np.concatenate([[0.0], np.cumsum(spec.beta * dt)])
    d_start = np.exp(-cum[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        cell = np.where(spec.beta > 0,
                        (1.0 - np.exp(-spec.beta * dt)) / np.where(spec.beta > 0, spec.beta, 1.0),
                        dt)
    return d_start * cell


def penalty(g: GeneratorSpec, spec: TiltSpec, grid: TimeGrid):
    """Dual penalty alpha(beta, q) = int_0^T D_{0,u} g*(beta_u, q_u) du.

    Deterministic tilts give a deterministic value, so the stderr is zero;
    the value is +inf as soon as one cell has an infinite conjugate.
    """
    weights = _discount_weights(spec, grid)
    total = 0.0
    for j in range(spec.n_cells):
        gstar = g.conjugate(float(spec.beta[j]), spec.q[j])
        if gstar == INF:
            return INF, 0.0
        total += weights[j] * gstar
    return float(total), 0.0


@dataclass(frozen=True)
class DualRow:
    q_summary: str
    beta_summary: str
    dual_value: float
    stderr: float
    alpha: float
    gap: float
    ok: bool


@dataclass(frozen=True)
class DualReport:
    primal: float
    primal_stderr: float
    rows: tuple
    best_dual: float

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)


def _summary(arr: np.ndarray) -> str:
    lo, hi = float(np.min(arr)), float(np.max(arr))
    return f"{lo:g}" if lo == hi else f"[{lo:g},{hi:g}]"


def dual_gap(handle, X: PathFunctional, specs: Sequence[TiltSpec],
             batch: BrownianBatch) -> DualReport:
    """Weak-duality check: every dual candidate value E_Q[D X] - alpha must
    stay below the primal value within the statistical band."""
    if not specs:
        raise ValueError("need at least one tilt")
    primal, p_err = handle.value(X, 1.0, batch)
    x = X.evaluate(batch)
    rows = []
    best = -INF
    for spec in specs:
        ts = tilt(batch, spec)
        alpha, _ = penalty(handle.generator, spec, batch.grid)
        if alpha == INF:
            rows.append(DualRow(_summary(spec.q), _summary(spec.beta),
                                -INF, 0.0, INF, INF, True))
            continue
        wx = ts.density * x
        mean = float(wx.mean()) * ts.discount
        se = float(wx.std(ddof=1) / np.sqrt(wx.size)) * ts.discount
        dual = mean - alpha
        best = max(best, dual)
        ok = dual <= primal + 3.0 * (se + p_err)
        rows.append(DualRow(_summary(spec.q), _summary(spec.beta),
                            dual, se, alpha, primal - dual, ok))
    return DualReport(primal=primal, primal_stderr=p_err, rows=tuple(rows),
                      best_dual=best)


def entropy_penalty_margin(g: GeneratorSpec, spec: TiltSpec, grid: TimeGrid) -> dict:
    """Margin of the entropy lower bound on the penalty for quadratic-growth
    generators: alpha >= (1/2c) e^{-bT} H(Q|P) - aT, all terms exact for
    deterministic tilts."""
    growth = g.growth
    if not (growth.c > 0 and math.isfinite(growth.c)):
        raise ValueError("entropy-penalty bound needs a finite quadratic coefficient")
    T = grid.horizon
    alpha, _ = penalty(g, spec, grid)
    entropy = 0.5 * float((spec.q ** 2).sum()) * grid.step
    floor = math.exp(-growth.b * T) / (2.0 * growth.c) * entropy - growth.a * T
    return {"alpha": alpha, "entropy": entropy, "floor": floor,
            "margin": alpha - floor if alpha != INF else INF}


def best_constant_tilt(handle, X: PathFunctional, batch: BrownianBatch,
                       radius: float = 4.0, budget: int = 1000) -> TiltSpec:
    """Coordinate-wise golden-section search for the constant drift with the
    largest dual value (beta = 0).  Returns the best tilt found."""
    d = batch.dimension
    grid = batch.grid
    x = X.evaluate(batch)
    g = handle.generator
    evals = 0

    def dual_value(qvec):
        nonlocal evals
        evals += 1
        spec = constant_tilt(grid, d, qvec)
        alpha, _ = penalty(g, spec, grid)
        if alpha == INF:
            return -INF
        ts = tilt(batch, spec)
        return float((ts.density * x).mean()) - alpha

    phi_ratio = (math.sqrt(5.0) - 1.0) / 2.0
    q = np.zeros(d)
    for _ in range(2):  # two coordinate-descent sweeps
        for j in range(d):
            lo, hi = -radius, radius
            c = hi - phi_ratio * (hi - lo)
            dd = lo + phi_ratio * (hi - lo)
            qc, qd = q.copy(), q.copy()
            qc[j], qd[j] = c, dd
            fc, fd = dual_value(qc), dual_value(qd)
            while hi - lo > 1e-3 and evals < budget:
                if fc >= fd:
                    hi, dd, fd = dd, c, fc
                    c = hi - phi_ratio * (hi - lo)
                    qc[j] = c
                    fc = dual_value(qc)
                else:
                    lo, c, fc = c, dd, fd
                    dd = lo + phi_ratio * (hi - lo)
                    qd[j] = dd
                    fd = dual_value(qd)
            q[j] = c if fc >= fd else dd
            if evals >= budget:
                break
    return constant_tilt(grid, d, q)
