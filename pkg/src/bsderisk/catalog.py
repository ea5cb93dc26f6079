"""Named constructors for the claims and generators the experiment runner
and the default corpus use.  Everything here is serializable from config
scalars."""

from __future__ import annotations

import numpy as np

from .generators import (GeneratorSpec, PowerFunction, entropic, lipschitz,
                         quadratic, superquadratic)
from .stochastics import (PathFunctional, TimeGrid, abs_terminal,
                          discretize_path_functional, log_contract,
                          positive_part, running_max, scale_claim,
                          shift_claim, terminal_value)

__all__ = ["make_claim", "make_generator", "random_linear_claims",
           "CLAIM_KINDS", "GENERATOR_KINDS"]

CLAIM_KINDS = ("terminal", "neg_terminal", "abs_terminal", "running_max",
               "log_contract", "log_contract_pos")
GENERATOR_KINDS = ("entropic", "lipschitz", "quadratic", "superquadratic")


def _neg_terminal(coord: int, clazz: str) -> PathFunctional:
    base = terminal_value(coord, clazz)
    ev = base.evaluator
    return PathFunctional(lambda incr, _e=ev: -_e(incr), 1.0, False, clazz,
                          name=f"neg_terminal[{coord}]", cert_norm=base.cert_norm)


def make_claim(kind: str, grid: TimeGrid, clazz: str = "levels",
               coord: int = 0, s0: float = 1.0, drift: float = 0.0,
               vol: float = 1.0, shift: float = 2.0) -> PathFunctional:
    """Build a corpus claim by name with the class tag the caller routes by."""
    if kind == "terminal":
        return terminal_value(coord, clazz)
    if kind == "neg_terminal":
        return _neg_terminal(coord, clazz)
    if kind == "abs_terminal":
        return abs_terminal(coord, clazz)
    if kind == "running_max":
        return running_max(coord, clazz)
    if kind in ("log_contract", "log_contract_pos"):
        base_clazz = clazz[:-len("_pos")] if clazz.endswith("_pos") else clazz
        claim = log_contract(s0, lambda t, _b=drift: _b,
                             lambda t, _v=vol: _v, grid, clazz=base_clazz)
        if kind == "log_contract_pos":
            claim = positive_part(shift_claim(claim, shift))
            if claim.class_tag != clazz and clazz.endswith("_pos"):
                pass  # positive_part already produced the _pos tag
        return claim
    raise ValueError(f"unknown claim kind {kind!r}; expected one of {CLAIM_KINDS}")


def make_generator(kind: str, *, kappa: float = 1.0, a: float = 0.0,
                   b: float = 0.0, c: float = 0.5, phi_scale: float = 1.0,
                   phi_power: float = 2.0) -> GeneratorSpec:
    """Build a generator by kind from config scalars."""
    if kind == "entropic":
        return entropic()
    if kind == "lipschitz":
        return lipschitz(kappa)
    if kind == "quadratic":
        return quadratic(a, b, c)
    if kind == "superquadratic":
        return superquadratic(b, PowerFunction(phi_scale, phi_power))
    raise ValueError(f"unknown generator kind {kind!r}; "
                     f"expected one of {GENERATOR_KINDS}")


def random_linear_claims(grid: TimeGrid, d: int, count: int, seed: int):
    """Random 1-Lipschitz linear claims sum a . dW with max|a| = 1, for
    monotonicity/convexity spot checks."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed) + 31))
    claims = []
    for i in range(count):
        a = rng.uniform(-1.0, 1.0, size=(grid.n_cells, d))
        a /= max(np.abs(a).max(), 1e-12)

        def ev(incr, _a=a):
            return np.einsum("mnd,nd->m", incr, _a)

        claims.append(PathFunctional(ev, 1.0, False, "increments",
                                     name=f"linear[{i}]"))
    return claims
