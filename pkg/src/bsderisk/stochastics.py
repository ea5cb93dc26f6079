"""Brownian path simulation on dyadic grids and Lipschitz claim functionals.

Claims are functions of the simulated increments.  Each claim carries a
class tag describing which argument it is Lipschitz in (level values of the
path, raw increments, or the interpolated path itself) together with the
norm its Lipschitz constant is certified under:

* ``levels`` / ``levels_pos``: 1-Lipschitz in the Euclidean norm of the
  vector of path values at the grid points.
* ``increments`` / ``increments_pos``: Lipschitz in the entrywise l1 norm
  of the increment matrix (the condition under which such claims have
  Malliavin derivative bounded by the constant).
* ``path``: Lipschitz in the per-coordinate uniform norm of the
  piecewise-linear path, summed over coordinates.
"""

from __future__ import annotations

import dataclasses
import json
import pathlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "TimeGrid",
    "BrownianBatch",
    "PathFunctional",
    "simulate",
    "discretize_path_functional",
    "log_contract",
    "terminal_value",
    "abs_terminal",
    "running_max",
    "scale_claim",
    "shift_claim",
    "positive_part",
    "block_average",
    "certify_lipschitz",
    "pair_distance",
    "save_batch",
    "load_batch",
    "sup_discretization_study",
]

CLASS_TAGS = ("levels", "levels_pos", "increments", "increments_pos", "path")
CERT_NORMS = ("levels_l2", "increments_l1", "path_sup")

# default certification norm per class tag
_TAG_NORM = {
    "levels": "levels_l2",
    "levels_pos": "levels_l2",
    "increments": "increments_l1",
    "increments_pos": "increments_l1",
    "path": "path_sup",
}


@dataclass(frozen=True)
class TimeGrid:
    """Uniform dyadic grid on [0, T] with 2**levels cells."""

    horizon: float
    levels: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.levels < 0 or int(self.levels) != self.levels:
            raise ValueError("levels must be a natural number (dyadic grids only)")

    @property
    def n_cells(self) -> int:
        return 2 ** self.levels

    @property
    def step(self) -> float:
        return self.horizon / self.n_cells

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_cells + 1)


@dataclass(frozen=True)
class BrownianBatch:
    """A batch of simulated Brownian increments on a dyadic grid.

    ``increments`` has shape (samples, n_cells, dimension); level values
    W_{t_k} are derived by prefix sums.
    """

    grid: TimeGrid
    dimension: int
    increments: np.ndarray
    seed: int

    @property
    def samples(self) -> int:
        return self.increments.shape[0]

    def levels(self) -> np.ndarray:
        """Path values at grid points, shape (samples, n_cells + 1, dimension)."""
        m, _, d = self.increments.shape
        out = np.empty((m, self.grid.n_cells + 1, d))
        out[:, 0, :] = 0.0
        np.cumsum(self.increments, axis=1, out=out[:, 1:, :])
        return out

    def running_max(self) -> np.ndarray:
        """Running maximum of the level values, shape like levels()."""
        return np.maximum.accumulate(self.levels(), axis=1)


def simulate(grid: TimeGrid, d: int, m: int, seed: int) -> BrownianBatch:
    """Simulate m i.i.d. d-dimensional Brownian paths as N(0, step) increments.

    Uses the counter-based Philox generator keyed by the seed, so identical
    arguments yield bitwise-identical batches.
    """
    if m < 1:
        raise ValueError("sample count m must be >= 1")
    if d < 1:
        raise ValueError("dimension d must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    incr = rng.standard_normal((m, grid.n_cells, d)) * np.sqrt(grid.step)
    incr.setflags(write=False)
    return BrownianBatch(grid=grid, dimension=d, increments=incr, seed=seed)


@dataclass(frozen=True)
class PathFunctional:
    """A claim X = f(path) with a certified Lipschitz constant.

    ``evaluator`` maps an increment array (m, n_cells, d) to values (m,).
    ``features`` lists the state variables a regression solver should
    condition on when solving a BSDE with this terminal condition.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    lipschitz_constant: float
    nonneg: bool
    class_tag: str
    name: str
    cert_norm: str = ""
    features: tuple = ("levels",)

    def __post_init__(self):
        if self.class_tag not in CLASS_TAGS:
            raise ValueError(f"unknown class tag {self.class_tag!r}")
        if not self.cert_norm:
            object.__setattr__(self, "cert_norm", _TAG_NORM[self.class_tag])
        if self.cert_norm not in CERT_NORMS:
            raise ValueError(f"unknown certification norm {self.cert_norm!r}")
        if self.lipschitz_constant < 0:
            raise ValueError("lipschitz_constant must be nonnegative")
        if self.class_tag.endswith("_pos") and not self.nonneg:
            raise ValueError(f"class {self.class_tag} requires a nonnegative claim")

    def evaluate(self, batch: BrownianBatch) -> np.ndarray:
        return np.asarray(self.evaluator(batch.increments), dtype=float)


def _with(pf: PathFunctional, **kw) -> PathFunctional:
    return dataclasses.replace(pf, **kw)


def scale_claim(pf: PathFunctional, lam: float) -> PathFunctional:
    """lam * X for lam >= 0; scales the certified constant accordingly."""
    if lam < 0:
        raise ValueError("scaling factor must be nonnegative")
    ev = pf.evaluator
    return _with(
        pf,
        evaluator=lambda incr, _e=ev, _l=lam: _l * _e(incr),
        lipschitz_constant=lam * pf.lipschitz_constant,
        name=f"{lam:g}*{pf.name}",
    )


def shift_claim(pf: PathFunctional, c: float) -> PathFunctional:
    """X + c; positivity is kept only when it survives the shift."""
    ev = pf.evaluator
    nonneg = pf.nonneg and c >= 0
    tag = pf.class_tag
    if tag.endswith("_pos") and not nonneg:
        tag = tag[: -len("_pos")]
    return _with(
        pf,
        evaluator=lambda incr, _e=ev, _c=c: _e(incr) + _c,
        nonneg=nonneg,
        class_tag=tag,
        name=f"{pf.name}{c:+g}",
    )


def positive_part(pf: PathFunctional) -> PathFunctional:
    """max(X, 0); preserves the Lipschitz constant, makes the claim nonnegative."""
    ev = pf.evaluator
    tag = pf.class_tag
    if not tag.endswith("_pos") and tag != "path":
        tag = tag + "_pos"
    return _with(
        pf,
        evaluator=lambda incr, _e=ev: np.maximum(_e(incr), 0.0),
        nonneg=True,
        class_tag=tag,
        name=f"max({pf.name},0)",
    )


def terminal_value(coord: int = 0, clazz: str = "levels") -> PathFunctional:
    """X = W_T for one coordinate: 1-Lipschitz under every certification norm."""
    if clazz.endswith("_pos"):
        raise ValueError("terminal value is signed")

    def ev(incr, _c=coord):
        return incr[:, :, _c].sum(axis=1)

    return PathFunctional(ev, 1.0, False, clazz, name=f"terminal[{coord}]")


def abs_terminal(coord: int = 0, clazz: str = "levels_pos") -> PathFunctional:
    """X = |W_T|: nonnegative, 1-Lipschitz."""

    def ev(incr, _c=coord):
        return np.abs(incr[:, :, _c].sum(axis=1))

    return PathFunctional(ev, 1.0, True, clazz, name=f"abs_terminal[{coord}]")


def running_max(coord: int = 0, clazz: str = "levels_pos") -> PathFunctional:
    """X = max over grid points of one coordinate (t = 0 included, so X >= 0)."""

    def ev(incr, _c=coord):
        lv = np.cumsum(incr[:, :, _c], axis=1)
        return np.maximum(lv.max(axis=1), 0.0)

    return PathFunctional(
        ev, 1.0, True, clazz, name=f"running_max[{coord}]",
        features=("levels", "running_max"),
    )


def discretize_path_functional(phi, grid: TimeGrid, name: str = "phi",
                               nonneg: bool = False) -> PathFunctional:
    """Compose a path-Lipschitz functional with the piecewise-linear
    interpolation of the increments.

    ``phi`` maps level values (m, n_cells + 1, d) of the interpolated path
    to (m,).  For functionals such as the terminal value or the running
    supremum, evaluation on the interpolation knots is exact.  The composite
    is an increment-class claim with constant 1, certified under the path
    sup norm it inherits from phi.
    """

    def ev(incr, _p=phi):
        m, n, d = incr.shape
        lv = np.empty((m, n + 1, d))
        lv[:, 0, :] = 0.0
        np.cumsum(incr, axis=1, out=lv[:, 1:, :])
        return np.asarray(_p(lv), dtype=float)

    tag = "increments_pos" if nonneg else "increments"
    return PathFunctional(
        ev, 1.0, nonneg, tag, name=f"{name}@n={grid.levels}",
        cert_norm="path_sup",
        features=("levels", "running_max"),
    )


def _per_cell(fn, grid: TimeGrid, d: int) -> np.ndarray:
    """Evaluate a scalar-or-vector function of time at the cell left endpoints."""
    t_left = grid.times[:-1]
    vals = np.asarray([np.broadcast_to(np.asarray(fn(t), dtype=float), (d,)).copy()
                       for t in t_left])
    return vals  # (n_cells, d)


def log_contract(s0: float, drift, vol, grid: TimeGrid,
                 clazz: str = "levels") -> PathFunctional:
    """Payoff log(S_T) for dS = S(b dt + sigma . dW), sigma componentwise in [-1, 1].

    X = log(s0) + int(b - |sigma|^2/2) dt + sum_j sigma(t_j) . dW_j with the
    cell-left-endpoint rule for the time integrals.  ``drift`` maps t to a
    scalar, ``vol`` maps t to a scalar or length-d vector.
    """
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    d = 1
    # probe vol dimension from t=0
    v0 = np.atleast_1d(np.asarray(vol(0.0), dtype=float))
    d = v0.size
    sig = _per_cell(vol, grid, d)                      # (n, d)
    if np.any(np.abs(sig) > 1.0 + 1e-12):
        raise ValueError("volatility components must lie in [-1, 1]")
    b = np.asarray([float(np.asarray(drift(t))) for t in grid.times[:-1]])
    const = float(np.log(s0) + np.sum((b - 0.5 * (sig ** 2).sum(axis=1)) * grid.step))

    def ev(incr, _s=sig, _c=const):
        return _c + np.einsum("mnd,nd->m", incr[:, :, : _s.shape[1]], _s)

    # certified constants per class: levels via Abel summation
    # f(levels) = const + sum_k (sig_k - sig_{k+1}) . x_k with sig_{n+1} = 0,
    # increments via the entrywise l1 bound, path only for constant vol
    sig_next = np.vstack([sig[1:], np.zeros((1, d))])
    diffs = sig - sig_next
    lip_levels = float(np.sqrt((diffs ** 2).sum()))
    lip_incr = float(np.abs(sig).sum(axis=1).max())
    if clazz in ("levels", "levels_pos"):
        lip, norm = lip_levels, "levels_l2"
    elif clazz in ("increments", "increments_pos"):
        lip, norm = lip_incr, "increments_l1"
    elif clazz == "path":
        if not np.allclose(sig, sig[0]):
            raise ValueError("path-class log contract requires constant volatility")
        lip, norm = float(np.abs(sig[0]).max()), "path_sup"
    else:
        raise ValueError(f"unknown class {clazz!r}")
    if clazz.endswith("_pos"):
        raise ValueError("log contract is signed; apply positive_part explicitly")
    return PathFunctional(ev, lip, False, clazz, name="log_contract", cert_norm=norm)


def block_average(template: Callable[[int], PathFunctional], n_blocks: int,
                  block_dim: int) -> PathFunctional:
    """Average of i.i.d. copies of a claim applied to disjoint coordinate blocks.

    ``template(coord)`` must build the claim reading coordinate ``coord``;
    the batch must carry at least n_blocks * block_dim coordinates.
    """
    claims = [template(i * block_dim) for i in range(n_blocks)]

    def ev(incr, _cs=tuple(c.evaluator for c in claims)):
        return sum(c(incr) for c in _cs) / len(_cs)

    first = claims[0]
    return _with(
        first,
        evaluator=ev,
        lipschitz_constant=first.lipschitz_constant,
        name=f"avg[{n_blocks}]({first.name})",
    )


def pair_distance(x: np.ndarray, y: np.ndarray, norm: str) -> np.ndarray:
    """Distance between two increment arrays under a certification norm.

    ``x`` and ``y`` have shape (m, n_cells, d); returns (m,).
    """
    diff = x - y
    if norm == "increments_l1":
        return np.abs(diff).sum(axis=(1, 2))
    if norm == "levels_l2":
        lv = np.cumsum(diff, axis=1)
        return np.sqrt((lv ** 2).sum(axis=(1, 2)))
    if norm == "path_sup":
        lv = np.cumsum(diff, axis=1)
        return np.abs(lv).max(axis=1).sum(axis=1)
    raise ValueError(f"unknown norm {norm!r}")


def certify_lipschitz(pf: PathFunctional, grid: TimeGrid, d: int,
                      n_pairs: int = 1000, seed: int = 0,
                      eps: float = 1e-10) -> float:
    """Sample random path pairs and return the worst Lipschitz violation.

    A nonpositive return certifies |f(x) - f(y)| <= L * ||x - y|| + eps on
    the sample; a positive return is the size of the worst breach.
    """
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed) + 7))
    scale = np.sqrt(grid.step)
    x = rng.standard_normal((n_pairs, grid.n_cells, d)) * scale
    y = x + rng.standard_normal((n_pairs, grid.n_cells, d)) * scale * rng.uniform(
        0.1, 2.0, size=(n_pairs, 1, 1))
    fx = np.asarray(pf.evaluator(x), dtype=float)
    fy = np.asarray(pf.evaluator(y), dtype=float)
    dist = pair_distance(x, y, pf.cert_norm)
    breach = np.abs(fx - fy) - pf.lipschitz_constant * dist - eps
    return float(breach.max())


# ---------------------------------------------------------------------------
# batch export / import

def save_batch(batch: BrownianBatch, basepath, fmt: str = "bin") -> None:
    """Write a batch as flat rows (one path per row, n_cells*d columns) plus
    a JSON metadata sidecar.  Binary layout is little-endian float64."""
    base = pathlib.Path(basepath)
    flat = batch.increments.reshape(batch.samples, -1)
    if fmt == "bin":
        flat.astype("<f8").tofile(base.with_suffix(".bin"))
    elif fmt == "csv":
        np.savetxt(base.with_suffix(".csv"), flat, delimiter=",",
                   header=",".join(f"dW_{k}_{j}" for k in range(batch.grid.n_cells)
                                   for j in range(batch.dimension)),
                   comments="")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    meta = {
        "horizon": batch.grid.horizon,
        "levels": batch.grid.levels,
        "dimension": batch.dimension,
        "samples": batch.samples,
        "seed": batch.seed,
        "format": fmt,
    }
    base.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=1))


def load_batch(basepath) -> BrownianBatch:
    base = pathlib.Path(basepath)
    meta = json.loads(base.with_suffix(".json").read_text())
    grid = TimeGrid(meta["horizon"], meta["levels"])
    shape = (meta["samples"], grid.n_cells, meta["dimension"])
    if meta["format"] == "bin":
        flat = np.fromfile(base.with_suffix(".bin"), dtype="<f8")
    else:
        flat = np.loadtxt(base.with_suffix(".csv"), delimiter=",", skiprows=1)
    incr = flat.reshape(shape)
    incr.setflags(write=False)
    return BrownianBatch(grid=grid, dimension=meta["dimension"],
                         increments=incr, seed=meta["seed"])


# ---------------------------------------------------------------------------
# discretization rate study for the running supremum

def sup_discretization_study(horizon: float, n_list, n_ref: int, m: int,
                             seed: int) -> dict:
    """Mean squared gap between fine-grid and coarse-grid running maxima.

    One batch is simulated at the reference resolution; coarse maxima are
    derived from the same paths by subsampling, so all levels are coupled.
    Returns per-level mean squared errors and the fitted log2 slope of
    MSE against 2**n.
    """
    if max(n_list) >= n_ref:
        raise ValueError("reference level must exceed every study level")
    grid = TimeGrid(horizon, n_ref)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    incr = rng.standard_normal((m, grid.n_cells)) * np.sqrt(grid.step)
    lv = np.cumsum(incr, axis=1)
    ref_max = np.maximum(lv.max(axis=1), 0.0)
    mse = {}
    for n in n_list:
        stride = 2 ** (n_ref - n)
        sub = lv[:, stride - 1 :: stride]
        coarse = np.maximum(sub.max(axis=1), 0.0)
        mse[n] = float(np.mean((ref_max - coarse) ** 2))
    ns = np.array(sorted(mse))
    logmse = np.log2([mse[n] for n in ns])
    slope = float(np.polyfit(ns, logmse, 1)[0])
    return {"mse": mse, "slope": slope, "ref_mean": float(ref_max.mean()),
            "ref_stderr": float(ref_max.std(ddof=1) / np.sqrt(m))}
