"""BSDE generators, their convex conjugates and growth envelopes.

A generator g(t, y, z) drives a dynamic risk measure through the backward
equation -dY = g(t, Y, Z) dt - Z dW.  Supported kinds:

* ``entropic``        g = |z|^2 / 2
* ``lipschitz``       g = kappa |z|
* ``quadratic``       g = a + b max(-y, 0) + c |z|^2
* ``superquadratic``  g = int_0^{|z|} phi(s) ds with phi from the power family
* ``capped``          a superquadratic generator radially frozen at |z| = K,
                      globally Lipschitz in z

Conjugates are closed-form per kind; extended-real values use ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Growth",
    "PowerFunction",
    "GeneratorSpec",
    "entropic",
    "lipschitz",
    "quadratic",
    "superquadratic",
    "cap_generator",
    "cap_level",
    "BoundFunction",
    "bound_function",
    "conjugate_of_bound",
]

INF = math.inf


@dataclass(frozen=True)
class Growth:
    """Coefficients of the envelope g(t,y,z) <= a + b|y| + c|z|^2."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0:
            raise ValueError("growth coefficients must be nonnegative")


@dataclass(frozen=True)
class PowerFunction:
    """x -> scale * x**power on [0, inf); the config-serializable monotone family."""

    scale: float
    power: float

    def __post_init__(self):
        if self.scale < 0 or self.power < 0:
            raise ValueError("scale and power must be nonnegative")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.power == 0:
            return np.full_like(x, self.scale)
        return self.scale * x ** self.power

    def antiderivative(self, x):
        """int_0^x of the function."""
        x = np.asarray(x, dtype=float)
        return self.scale * x ** (self.power + 1) / (self.power + 1)

    def derivative_bound(self) -> "PowerFunction":
        """A Lipschitz modulus: |f(x)-f(y)| <= bound(max) * |x-y|."""
        if self.power == 0:
            return PowerFunction(0.0, 0.0)
        return PowerFunction(self.scale * self.power, self.power - 1)


def _znorm(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        return np.abs(z)
    return np.sqrt((z ** 2).sum(axis=-1))


@dataclass(frozen=True)
class GeneratorSpec:
    """A generator with its conjugate, growth envelope and metadata.

    ``evaluate(t, y, z)`` is vectorized: y broadcasts against the leading
    axes of z (last axis of z is the Brownian dimension, or z is scalar).
    ``conjugate(beta, q)`` is the Legendre transform
    sup_{y,z} (-beta*y + q.z - g(y,z)); +inf outside 0 <= beta <= b.
    """

    kind: str
    evaluate: Callable
    conjugate: Callable
    growth: Growth
    depends_on_y: bool
    lipschitz_z: Optional[float] = None
    params: dict = field(default_factory=dict)

    def describe(self) -> str:
        items = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in sorted(self.params.items()))
        return f"{self.kind}({items})"


def _beta_ok(beta: float, b: float) -> bool:
    return -1e-12 <= beta <= b + 1e-12


def entropic() -> GeneratorSpec:
    """g(z) = |z|^2 / 2; self-conjugate: g*(q) = |q|^2 / 2."""

    def ev(t, y, z):
        return 0.5 * _znorm(z) ** 2

    def conj(beta, q):
        if not _beta_ok(beta, 0.0):
            return INF
        return 0.5 * float(_znorm(q) ** 2)

    return GeneratorSpec("entropic", ev, conj, Growth(0.0, 0.0, 0.5),
                         depends_on_y=False, params={})


def lipschitz(kappa: float) -> GeneratorSpec:
    """g(z) = kappa |z|; conjugate is the indicator of the kappa-ball."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")

    def ev(t, y, z, _k=kappa):
        return _k * _znorm(z)

    def conj(beta, q, _k=kappa):
        if not _beta_ok(beta, 0.0):
            return INF
        return 0.0 if _znorm(q) <= _k + 1e-12 else INF

    # minimal quadratic envelope: kappa|z| <= kappa/2 + (kappa/2)|z|^2
    return GeneratorSpec("lipschitz", ev, conj,
                         Growth(kappa / 2.0, 0.0, kappa / 2.0),
                         depends_on_y=False, lipschitz_z=kappa,
                         params={"kappa": kappa})


def quadratic(a: float, b: float, c: float) -> GeneratorSpec:
    """g(t,y,z) = a + b max(-y,0) + c|z|^2: positive, decreasing in y, convex.

    Attains the growth envelope; conjugate g*(beta,q) = |q|^2/(4c) - a for
    0 <= beta <= b, +inf outside.
    """
    if min(a, b, c) < 0:
        raise ValueError("a, b, c must be nonnegative")

    def ev(t, y, z, _a=a, _b=b, _c=c):
        y = np.asarray(y, dtype=float)
        return _a + _b * np.maximum(-y, 0.0) + _c * _znorm(z) ** 2

    def conj(beta, q, _a=a, _b=b, _c=c):
        if not _beta_ok(beta, _b):
            return INF
        nq = float(_znorm(q))
        if _c == 0.0:
            return -_a if nq <= 1e-12 else INF
        return nq ** 2 / (4.0 * _c) - _a

    return GeneratorSpec("quadratic", ev, conj, Growth(a, b, c),
                         depends_on_y=b > 0, lipschitz_z=0.0 if c == 0 else None,
                         params={"a": a, "b": b, "c": c})


def superquadratic(b: float, phi: PowerFunction,
                   theta: Optional[PowerFunction] = None) -> GeneratorSpec:
    """g(z) = int_0^{|z|} phi(s) ds: convex, positive, vanishing at z = 0.

    Satisfies |g(y,z) - g(y',z')| <= b|y-y'| + phi(|z| v |z'|)|z-z'| with the
    given phi; theta defaults to phi's own Lipschitz modulus.  The evaluate
    itself is y-free (the b allowance only enters capping and bounds).
    """
    if b < 0:
        raise ValueError("b must be nonnegative")
    if theta is None:
        theta = phi.derivative_bound()

    def ev(t, y, z, _p=phi):
        return _p.antiderivative(_znorm(z))

    p, s = phi.power, phi.scale

    def conj(beta, q, _b=b, _p=p, _s=s):
        if not _beta_ok(beta, _b):
            return INF
        nq = float(_znorm(q))
        if _p == 0:
            return 0.0 if nq <= _s + 1e-12 else INF
        if _s == 0:
            return 0.0 if nq <= 1e-12 else INF
        # sup_r (nq*r - s*r^(p+1)/(p+1)) at r* = (nq/s)^(1/p)
        return _p / (_p + 1.0) * _s ** (-1.0 / _p) * nq ** ((_p + 1.0) / _p)

    if p > 1:
        growth = Growth(0.0, b, INF)
    elif p == 1:
        growth = Growth(0.0, b, s / 2.0)
    else:  # p == 0: s|z| <= s/2 + (s/2)|z|^2
        growth = Growth(s / 2.0, b, s / 2.0)
    return GeneratorSpec("superquadratic", ev, conj, growth,
                         depends_on_y=False,
                         params={"b": b, "phi": phi, "theta": theta})


def cap_level(horizon: float) -> float:
    """The control-process bound K = T e^T used for radial capping."""
    return horizon * math.exp(horizon)


def cap_generator(g: GeneratorSpec, horizon: float) -> GeneratorSpec:
    """Radially freeze the majorant b|y|-envelope + phi(|z|)|z| beyond K = T e^T.

    Returns a globally Lipschitz-in-z generator agreeing with
    g~(y, z) = b max(-y,0) + phi(|z|)|z| for |z| <= K and constant along rays
    beyond; its z-Lipschitz constant is c = phi(K) + K theta(K).  Capping an
    already capped (or constant-phi) generator is the identity in value.
    """
    if g.kind == "capped":
        return g
    if g.kind == "lipschitz":
        # phi == kappa constant, theta == 0: freezing changes nothing
        return g
    if g.kind != "superquadratic":
        raise ValueError("cap_generator expects a superquadratic generator")
    phi: PowerFunction = g.params["phi"]
    theta: PowerFunction = g.params["theta"]
    b = float(g.params["b"])
    K = cap_level(horizon)
    c = float(phi(K) + K * theta(K))
    frozen = phi.power > 0  # constant phi is already Lipschitz: no freeze

    def ev(t, y, z, _b=b, _p=phi, _K=K, _f=frozen):
        y = np.asarray(y, dtype=float)
        r = _znorm(z)
        if _f:
            r = np.minimum(r, _K)
        return _b * np.maximum(-y, 0.0) + _p(r) * r

    def conj(beta, q, _b=b, _f=frozen, _s=phi.scale):
        if not _beta_ok(beta, _b):
            return INF
        if not _f:  # kappa|z| piece: indicator of the ball
            return 0.0 if _znorm(q) <= _s + 1e-12 else INF
        # the frozen generator is bounded in z, so the transform is +inf
        # away from q = 0; use the uncapped spec for finite dual penalties
        return 0.0 if _znorm(q) <= 1e-12 else INF

    return GeneratorSpec("capped", ev, conj, Growth(0.0, b, c),
                         depends_on_y=b > 0, lipschitz_z=c,
                         params={"b": b, "phi": phi, "theta": theta,
                                 "cap": K, "c": c, "horizon": horizon})


# ---------------------------------------------------------------------------
# concentration bound functions l(lambda) = quad * lambda^2 + const

@dataclass(frozen=True)
class BoundFunction:
    """Convex increasing bound l(lambda) = quad_coef * lambda^2 + a_coef."""

    quad_coef: float
    a_coef: float
    source: str

    def __post_init__(self):
        if self.quad_coef < 0 or self.a_coef < 0:
            raise ValueError("bound coefficients must be nonnegative")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.quad_coef * lam ** 2 + self.a_coef

    def conjugate(self, r: float) -> float:
        return conjugate_of_bound(self, r)

    def conjugate_inverse(self, v: float) -> float:
        """Left inverse of the increasing conjugate on [0, inf)."""
        if self.quad_coef == 0.0:
            return 0.0
        v = max(v, -self.a_coef)
        return 2.0 * math.sqrt(self.quad_coef * (v + self.a_coef))


_SOURCES = ("quadratic-growth", "kappa-domination", "capped-superquadratic")


def bound_function(source: str, *, horizon: float, a: float = 0.0,
                   b: float = 0.0, c: float = 0.0,
                   kappa: float = 0.0) -> BoundFunction:
    """Build the concentration bound matching a result family.

    * ``quadratic-growth``: l = e^{bT} c T lambda^2 + a
    * ``kappa-domination``: l = kappa (T lambda^2 + 1)
    * ``capped-superquadratic``: l = e^{bT} c T lambda^2 with
      c = phi(Te^T) + Te^T theta(Te^T)
    """
    T = horizon
    if T <= 0:
        raise ValueError("horizon must be positive")
    if source == "quadratic-growth":
        return BoundFunction(math.exp(b * T) * c * T, a, source)
    if source == "kappa-domination":
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        return BoundFunction(kappa * T, kappa, source)
    if source == "capped-superquadratic":
        return BoundFunction(math.exp(b * T) * c * T, 0.0, source)
    raise ValueError(f"unknown bound source {source!r}; expected one of {_SOURCES}")


def conjugate_of_bound(l: BoundFunction, r: float) -> float:
    """True Legendre value l*(r) = sup_{lam >= 0} (lam r - l(lam)) for r >= 0.

    For quad_coef > 0 the supremum sits at lam = r / (2 quad_coef), giving
    r^2/(4 quad_coef) - a_coef; the value may be negative (down to -a_coef).
    A degenerate quadratic part yields +inf for r > 0 and -a_coef at r = 0.
    """
    if r < 0:
        raise ValueError("conjugate argument must be nonnegative")
    if l.quad_coef == 0.0:
        return -l.a_coef if r == 0.0 else INF
    return r * r / (4.0 * l.quad_coef) - l.a_coef
