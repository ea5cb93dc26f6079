"""Config-driven experiment runner binding all modules.

``bsderisk run <config.toml>`` executes the suites declared in the config
and writes per-suite JSON/CSV reports plus a summary; the exit status is
nonzero exactly when some check ends in a VIOLATION verdict (or a suite
crashed).  ``bsderisk list-suites`` prints the catalog.

Config dialect: TOML with all numerics as decimal strings (avoids float
literal drift across writers); see configs/ for the shipped corpus.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .bsde import PicardDivergenceError, RiskMeasureHandle, axiom_report
from .catalog import make_claim, make_generator, random_linear_claims
from .concentration import (BIAS_COEFFICIENT, default_bound, deviation_check,
                            dimension_free_check, pde_check, profile)
from .duality import (constant_tilt, dual_gap, entropy_penalty_margin,
                      penalty, piecewise_tilt, relative_entropy, tilt)
from .generators import BoundFunction
from .reports import (INCONCLUSIVE, PASS, VIOLATION, combine_verdicts,
                      verdict, write_csv, write_json)
from .stochastics import TimeGrid, simulate
from .transport import transport_inequality_check

ENV_OUT = "BSDERISK_OUT"

SUITE_CATALOG = {
    "profile": (
        "risk-curve bound: value(lam*X) <= lam*E[X] + l(lam) on a lambda grid, "
        "per (generator, claim, variant) cell",
        "suites.profile.lambdas, suites.profile.cases[].{generator,claim,variant}",
    ),
    "dual": (
        "density martingale mean, Girsanov entropy identity, entropy floor of "
        "the dual penalty, and weak duality of tilted candidates",
        "suites.dual.{generators,claim,n_tilts,q_low,q_high,dimensions}",
    ),
    "transport": (
        "transport-type inequality: l*(lower estimate of W1(Q^q, P)) <= alpha(q) "
        "over constant drift tilts",
        "suites.transport.{generator,claims,q_values[,subprobability,search]}",
    ),
    "deviation": (
        "tail bound: P(X > median + r) <= exp(-l*(r - l*^{-1}(log 2))) on an "
        "r grid at 95% confidence",
        "suites.deviation.{claims,r_grid,quad_coef,a_coef}",
    ),
    "dimfree": (
        "averaging bound: value(lam * mean of n i.i.d. block claims) <= "
        "lam*E[X_1] + l(lam), bound independent of n",
        "suites.dimfree.{generator,template,lam,n_list}",
    ),
    "pde": (
        "finite-difference value function of the centered, bound-shifted claim "
        "stays nonpositive within the grid budget",
        "suites.pde.{generator,terminal,s,x,lambdas}",
    ),
    "axioms": (
        "risk-measure axioms: normalization, cash additivity, monotonicity, "
        "convexity, tower property",
        "suites.axioms.{generators,n_pairs}",
    ),
}

_TERMINAL_MAPS = {
    "identity": lambda x: x,
    "abs": lambda x: np.abs(x),
    "relu": lambda x: np.maximum(x, 0.0),
}


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _dec(raw, path: str) -> float:
    if isinstance(raw, bool):
        raise ConfigError(path, "expected a decimal string, got a boolean")
    if isinstance(raw, (int, float)):
        raise ConfigError(path, "numerics must be decimal strings, "
                                f"got bare literal {raw!r}")
    try:
        return float(Decimal(str(raw)))
    except InvalidOperation:
        raise ConfigError(path, f"not a decimal number: {raw!r}") from None


def _int(raw, path: str) -> int:
    v = _dec(raw, path)
    if v != int(v):
        raise ConfigError(path, f"expected an integer, got {raw!r}")
    return int(v)


def _dec_list(raw, path: str):
    if not isinstance(raw, list) or not raw:
        raise ConfigError(path, "expected a nonempty list of decimal strings")
    return [_dec(v, f"{path}[{i}]") for i, v in enumerate(raw)]


def _str_list(raw, path: str):
    if not isinstance(raw, list) or not raw:
        raise ConfigError(path, "expected a nonempty list of names")
    return [str(v) for v in raw]


@dataclass
class ExperimentConfig:
    """Validated experiment description with resolved cross-references."""

    seed: int
    grid: TimeGrid
    dimension: int
    samples: int
    output: str
    suites: dict
    generators: dict
    claims_cfg: dict
    bias_coefficient: float = BIAS_COEFFICIENT
    source_path: str = ""

    def batch(self, seed_offset: int = 0, dimension: int = None,
              levels: int = None, samples: int = None):
        grid = self.grid if levels is None else TimeGrid(self.grid.horizon, levels)
        return simulate(grid, dimension or self.dimension,
                        samples or self.samples, self.seed + seed_offset)

    def claim(self, name: str, grid: TimeGrid = None):
        cfg = dict(self.claims_cfg[name])
        clazz = cfg.pop("class", "levels")
        return make_claim(cfg.pop("kind"), grid or self.grid, clazz=clazz, **cfg)

    def handle(self, name: str) -> RiskMeasureHandle:
        return RiskMeasureHandle(self.generators[name], name=name)


def load_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment config; all cross-references and
    routing legality are resolved here, before anything runs."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"TOML syntax error: {exc}") from None
    exp = raw.get("experiment")
    if not isinstance(exp, dict):
        raise ConfigError("experiment", "missing [experiment] table")
    seed = _int(exp.get("seed", "0"), "experiment.seed")
    horizon = _dec(exp.get("horizon", "1"), "experiment.horizon")
    levels = _int(exp.get("levels", "6"), "experiment.levels")
    dimension = _int(exp.get("dimension", "1"), "experiment.dimension")
    samples = _int(exp.get("samples", "20000"), "experiment.samples")
    output = str(exp.get("output", ""))
    grid = TimeGrid(horizon, levels)

    tol = raw.get("tolerances", {})
    bias = _dec(tol.get("bias_coefficient", str(BIAS_COEFFICIENT)),
                "tolerances.bias_coefficient") if tol else BIAS_COEFFICIENT

    generators = {}
    for name, spec in raw.get("generators", {}).items():
        path_g = f"generators.{name}"
        if "kind" not in spec:
            raise ConfigError(path_g, "missing generator kind")
        params = {k: _dec(v, f"{path_g}.{k}") for k, v in spec.items()
                  if k != "kind"}
        try:
            generators[name] = make_generator(spec["kind"], **params)
        except (ValueError, TypeError) as exc:
            raise ConfigError(path_g, str(exc)) from None

    claims_cfg = {}
    for name, spec in raw.get("claims", {}).items():
        path_c = f"claims.{name}"
        if "kind" not in spec:
            raise ConfigError(path_c, "missing claim kind")
        cfg = {"kind": spec["kind"]}
        if "class" in spec:
            cfg["class"] = str(spec["class"])
        for k in ("coord",):
            if k in spec:
                cfg[k] = _int(spec[k], f"{path_c}.{k}")
        for k in ("s0", "drift", "vol", "shift"):
            if k in spec:
                cfg[k] = _dec(spec[k], f"{path_c}.{k}")
        claims_cfg[name] = cfg

    suites_raw = raw.get("suites", {})
    if not suites_raw:
        raise ConfigError("suites", "no suites declared")
    selected = exp.get("suites", "all")
    if selected != "all":
        selected = _str_list(selected, "experiment.suites")
        unknown = set(selected) - set(suites_raw)
        if unknown:
            raise ConfigError("experiment.suites",
                              f"selected suites absent from config: {sorted(unknown)}")
        suites_raw = {k: v for k, v in suites_raw.items() if k in selected}
    for name in suites_raw:
        if name not in SUITE_CATALOG:
            raise ConfigError(f"suites.{name}", "unknown suite; see list-suites")

    cfg = ExperimentConfig(seed=seed, grid=grid, dimension=dimension,
                           samples=samples, output=output, suites=suites_raw,
                           generators=generators, claims_cfg=claims_cfg,
                           bias_coefficient=bias, source_path=str(path))
    _validate_suites(cfg)
    return cfg


def _require(table, key, path):
    if key not in table:
        raise ConfigError(path, f"missing required field {key!r}")
    return table[key]


def _validate_suites(cfg: ExperimentConfig) -> None:
    from .concentration import check_routing
    for name, spec in cfg.suites.items():
        path = f"suites.{name}"
        if name == "profile":
            _dec_list(_require(spec, "lambdas", path), f"{path}.lambdas")
            cases = _require(spec, "cases", path)
            if not isinstance(cases, list) or not cases:
                raise ConfigError(f"{path}.cases", "expected a nonempty array of tables")
            for i, case in enumerate(cases):
                cpath = f"{path}.cases[{i}]"
                gname = _require(case, "generator", cpath)
                cname = _require(case, "claim", cpath)
                variant = _require(case, "variant", cpath)
                if gname not in cfg.generators:
                    raise ConfigError(cpath, f"unknown generator {gname!r}")
                if cname not in cfg.claims_cfg:
                    raise ConfigError(cpath, f"unknown claim {cname!r}")
                try:
                    check_routing(variant, cfg.generators[gname], cfg.claim(cname))
                except ValueError as exc:
                    raise ConfigError(cpath, str(exc)) from None
        elif name in ("dual", "transport", "dimfree", "pde", "axioms"):
            for key in {"dual": ("generators",), "transport": ("generator", "claims"),
                        "dimfree": ("generator", "template", "lam", "n_list"),
                        "pde": ("generator", "terminal", "lambdas"),
                        "axioms": ("generators",)}[name]:
                _require(spec, key, path)
            gen_names = spec.get("generators") or [spec.get("generator")]
            for g in gen_names:
                if g not in cfg.generators:
                    raise ConfigError(path, f"unknown generator {g!r}")
            for c in spec.get("claims", []):
                if c not in cfg.claims_cfg:
                    raise ConfigError(path, f"unknown claim {c!r}")
            if name == "dual" and spec.get("claim") and \
                    spec["claim"] not in cfg.claims_cfg:
                raise ConfigError(path, f"unknown claim {spec['claim']!r}")
            if name == "pde" and spec["terminal"] not in _TERMINAL_MAPS:
                raise ConfigError(f"{path}.terminal",
                                  f"unknown terminal map {spec['terminal']!r}")
        elif name == "deviation":
            _require(spec, "claims", path)
            _dec_list(_require(spec, "r_grid", path), f"{path}.r_grid")
            _dec(_require(spec, "quad_coef", path), f"{path}.quad_coef")
            for c in spec["claims"]:
                if c not in cfg.claims_cfg:
                    raise ConfigError(path, f"unknown claim {c!r}")


# ---------------------------------------------------------------------------
# suite runners: each returns (payload dict, csv header, csv rows)

def _run_profile(cfg: ExperimentConfig, spec) -> dict:
    lambdas = _dec_list(spec["lambdas"], "suites.profile.lambdas")
    batch = cfg.batch()
    second = lambda: cfg.batch(seed_offset=1)
    rows_csv = []
    cells = []
    for case in spec["cases"]:
        handle = cfg.handle(case["generator"])
        claim = cfg.claim(case["claim"])
        variant = case["variant"]
        bound = default_bound(variant, handle.generator, cfg.grid.horizon)
        try:
            prof = profile(handle, claim, lambdas, batch, bound, variant,
                           bias_coefficient=cfg.bias_coefficient,
                           second_batch=second)
        except PicardDivergenceError as exc:
            cells.append({"generator": case["generator"], "claim": case["claim"],
                          "variant": variant, "status": "suspected-infinite",
                          "detail": str(exc), "verdict": INCONCLUSIVE})
            continue
        cells.append({
            "generator": case["generator"], "claim": case["claim"],
            "variant": variant, "verdict": prof.verdict,
            "convexity_ok": prof.convexity_ok,
            "mean_claim": prof.mean_claim,
            "rows": [vars(r) for r in prof.rows],
        })
        for r in prof.rows:
            rows_csv.append([case["generator"], case["claim"], variant, r.lam,
                             r.value, r.stderr, r.bound, r.margin, r.verdict])
    payload = {"suite": "profile",
               "verdict": combine_verdicts(c["verdict"] for c in cells),
               "cells": cells}
    header = ["generator", "claim", "variant", "lambda", "value", "stderr",
              "bound", "margin", "verdict"]
    return {"payload": payload, "csv": (header, rows_csv)}


def _random_tilts(cfg, spec, grid, d, rng):
    n_tilts = _int(spec.get("n_tilts", "10"), "suites.dual.n_tilts")
    q_low = _dec(spec.get("q_low", "-2"), "suites.dual.q_low")
    q_high = _dec(spec.get("q_high", "2"), "suites.dual.q_high")
    pieces = _int(spec.get("pieces", "4"), "suites.dual.pieces")
    b_max = _dec(spec.get("beta_high", "0"), "suites.dual.beta_high")
    tilts = []
    for _ in range(n_tilts):
        qp = [rng.uniform(q_low, q_high, size=d) for _ in range(pieces)]
        bp = rng.uniform(0.0, b_max, size=pieces) if b_max > 0 else None
        tilts.append(piecewise_tilt(grid, d, qp, bp))
    return tilts


def _run_dual(cfg: ExperimentConfig, spec) -> dict:
    rng = np.random.Generator(np.random.Philox(key=np.uint64(cfg.seed) + 1234))
    dims = [_int(v, "suites.dual.dimensions") for v in
            spec.get("dimensions", ["1"])]
    claim_name = spec.get("claim")
    rows_csv = []
    sections = []
    for d in dims:
        batch = cfg.batch(dimension=d)
        tilts = _random_tilts(cfg, spec, batch.grid, d, rng)
        identity_rows = []
        for i, ts_spec in enumerate(tilts):
            sample = tilt(batch, ts_spec)
            mean_density = float(sample.density.mean())
            se_density = float(sample.density.std(ddof=1) / np.sqrt(sample.density.size))
            est, se, closed = relative_entropy(sample)
            gap = est - closed
            vd = verdict(-abs(gap), se)  # two-sided identity at 3 sigma
            mart = verdict(-abs(mean_density - 1.0), se_density)
            identity_rows.append({
                "tilt": i, "mean_density": mean_density,
                "entropy_estimate": est, "entropy_stderr": se,
                "entropy_closed_form": closed, "gap": gap,
                "identity_verdict": vd, "martingale_verdict": mart,
            })
            rows_csv.append([d, i, "entropy-identity", gap, se, vd])
            rows_csv.append([d, i, "density-martingale", mean_density - 1.0,
                             se_density, mart])
        floor_rows = []
        for gname in spec.get("generators", []):
            g = cfg.generators[gname]
            if not (g.growth.c > 0 and np.isfinite(g.growth.c)):
                continue
            for i, ts_spec in enumerate(tilts):
                rep = entropy_penalty_margin(g, ts_spec, batch.grid)
                ok = rep["margin"] >= -1e-9
                floor_rows.append({"generator": gname, "tilt": i, **rep,
                                   "verdict": PASS if ok else VIOLATION})
                rows_csv.append([d, i, f"entropy-floor[{gname}]",
                                 rep["margin"], 0.0,
                                 PASS if ok else VIOLATION])
        gap_rows = []
        if claim_name:
            claim = cfg.claim(claim_name)
            for gname in spec.get("generators", []):
                handle = cfg.handle(gname)
                rep = dual_gap(handle, claim, tilts, batch)
                for r in rep.rows:
                    gap_rows.append({"generator": gname, **vars(r)})
                    rows_csv.append([d, r.q_summary, f"weak-duality[{gname}]",
                                     r.gap, r.stderr,
                                     PASS if r.ok else VIOLATION])
        sections.append({"dimension": d, "entropy_identity": identity_rows,
                         "entropy_floor": floor_rows, "weak_duality": gap_rows})
    verdicts = []
    for s in sections:
        verdicts += [r["identity_verdict"] for r in s["entropy_identity"]]
        verdicts += [r["martingale_verdict"] for r in s["entropy_identity"]]
        verdicts += [r["verdict"] for r in s["entropy_floor"]]
        verdicts += [PASS if r["ok"] else VIOLATION for r in s["weak_duality"]]
    payload = {"suite": "dual", "verdict": combine_verdicts(verdicts),
               "sections": sections}
    header = ["dimension", "tilt", "check", "margin", "stderr", "verdict"]
    return {"payload": payload, "csv": (header, rows_csv)}


def _run_transport(cfg: ExperimentConfig, spec) -> dict:
    gname = spec["generator"]
    g = cfg.generators[gname]
    variant = spec.get("variant",
                       "capped-superquadratic" if g.kind == "superquadratic"
                       else "quadratic-growth")
    bound = default_bound(variant, g, cfg.grid.horizon)
    batch = cfg.batch()
    claims = [cfg.claim(c) for c in spec["claims"]]
    subp = bool(spec.get("subprobability", False))
    tilts = [constant_tilt(cfg.grid, cfg.dimension, q)
             for q in _dec_list(spec["q_values"], "suites.transport.q_values")]
    report = transport_inequality_check(g, bound, tilts, claims, batch,
                                        subprobability=subp)
    rows_csv = [[r.q_summary, r.w1_estimate, r.stderr, r.lstar, r.alpha,
                 r.margin, PASS if r.ok else VIOLATION] for r in report.rows]
    payload = {"suite": "transport", "generator": gname, "variant": variant,
               "subprobability": subp,
               "verdict": PASS if report.passed else VIOLATION,
               "rows": [vars(r) for r in report.rows]}
    header = ["tilt", "w1_estimate", "stderr", "lstar", "alpha", "margin",
              "verdict"]
    return {"payload": payload, "csv": (header, rows_csv)}


def _run_deviation(cfg: ExperimentConfig, spec) -> dict:
    bound = BoundFunction(_dec(spec["quad_coef"], "suites.deviation.quad_coef"),
                          _dec(spec.get("a_coef", "0"), "suites.deviation.a_coef"),
                          "configured")
    r_grid = _dec_list(spec["r_grid"], "suites.deviation.r_grid")
    batch = cfg.batch()
    second = lambda: cfg.batch(seed_offset=1)
    rows_csv = []
    sections = []
    for cname in spec["claims"]:
        claim = cfg.claim(cname)
        rep = deviation_check(batch, claim, bound, r_grid, second_batch=second)
        sections.append({"claim": cname, "median": rep.median,
                         "median_interval": list(rep.median_interval),
                         "verdict": rep.verdict,
                         "rows": [vars(r) for r in rep.rows]})
        for r in rep.rows:
            rows_csv.append([cname, r.r, r.tail, r.tail_lo, r.tail_hi,
                             r.bound, r.verdict])
    payload = {"suite": "deviation",
               "verdict": combine_verdicts(s["verdict"] for s in sections),
               "sections": sections}
    header = ["claim", "r", "tail", "tail_lo", "tail_hi", "bound", "verdict"]
    return {"payload": payload, "csv": (header, rows_csv)}


def _run_dimfree(cfg: ExperimentConfig, spec) -> dict:
    handle = cfg.handle(spec["generator"])
    n_list = [_int(v, "suites.dimfree.n_list") for v in spec["n_list"]]
    lam = _dec(spec["lam"], "suites.dimfree.lam")
    template_kind = spec["template"]
    levels = _int(spec.get("levels", "4"), "suites.dimfree.levels")
    grid = TimeGrid(cfg.grid.horizon, levels)
    batch = cfg.batch(dimension=max(n_list), levels=levels)

    def template(coord):
        return make_claim(template_kind, grid, clazz="levels", coord=coord)

    bound = default_bound(spec.get("variant", "quadratic-growth"),
                          handle.generator, cfg.grid.horizon)
    rep = dimension_free_check(handle, template, n_list, lam, bound, batch,
                               bias_coefficient=cfg.bias_coefficient)
    rows_csv = [[r.n, r.value, r.stderr, r.bound, r.margin, r.verdict]
                for r in rep.rows]
    payload = {"suite": "dimfree", "lam": lam, "verdict": rep.verdict,
               "bound_constant": rep.bound_constant,
               "rows": [vars(r) for r in rep.rows]}
    return {"payload": payload,
            "csv": (["n", "value", "stderr", "bound", "margin", "verdict"],
                    rows_csv)}


def _run_pde(cfg: ExperimentConfig, spec) -> dict:
    handle = cfg.handle(spec["generator"])
    g = handle.generator
    bound = default_bound(spec.get("variant", "quadratic-growth"), g,
                          cfg.grid.horizon)
    f = _TERMINAL_MAPS[spec["terminal"]]
    s = _dec(spec.get("s", "0"), "suites.pde.s")
    x = _dec(spec.get("x", "0"), "suites.pde.x")
    lambdas = _dec_list(spec["lambdas"], "suites.pde.lambdas")
    nx = _int(spec.get("nx", "241"), "suites.pde.nx")
    nt = _int(spec["nt"], "suites.pde.nt") if "nt" in spec else None
    rep = pde_check(g, bound, f, s, x, lambdas, cfg.grid.horizon, nx=nx, nt=nt)
    rows_csv = [[r.lam, r.v_value, r.budget, r.verdict] for r in rep.rows]
    payload = {"suite": "pde", "s": s, "x": x, "verdict": rep.verdict,
               "rows": [vars(r) for r in rep.rows]}
    return {"payload": payload,
            "csv": (["lambda", "v_value", "budget", "verdict"], rows_csv)}


def _run_axioms(cfg: ExperimentConfig, spec) -> dict:
    n_pairs = _int(spec.get("n_pairs", "20"), "suites.axioms.n_pairs")
    batch = cfg.batch()
    base_claims = [cfg.claim(c) for c in spec.get("claims", [])] or \
        [make_claim("terminal", cfg.grid, clazz="increments")]
    linear = random_linear_claims(cfg.grid, cfg.dimension, 2 * n_pairs,
                                  cfg.seed)
    pairs = list(zip(linear[:n_pairs], linear[n_pairs:]))
    tower = make_claim("running_max", cfg.grid, clazz="increments_pos")
    rows_csv = []
    sections = []
    for gname in spec["generators"]:
        handle = cfg.handle(gname)
        rep = axiom_report(handle, batch, base_claims, pairs,
                           tower_claim=tower)
        ok = rep.pop("ok")
        sections.append({"generator": gname, "ok": ok, "checks": rep})
        for check, res in rep.items():
            rows_csv.append([gname, check,
                             PASS if res.get("ok", True) else VIOLATION])
    payload = {"suite": "axioms",
               "verdict": combine_verdicts(
                   PASS if s["ok"] else VIOLATION for s in sections),
               "sections": sections}
    return {"payload": payload,
            "csv": (["generator", "check", "verdict"], rows_csv)}


_RUNNERS = {
    "profile": _run_profile,
    "dual": _run_dual,
    "transport": _run_transport,
    "deviation": _run_deviation,
    "dimfree": _run_dimfree,
    "pde": _run_pde,
    "axioms": _run_axioms,
}


# ---------------------------------------------------------------------------
# orchestration

def run(cfg: ExperimentConfig, out_dir=None, jobs: int = 1,
        fail_fast: bool = False) -> int:
    """Execute the configured suites; write reports; return the exit status."""
    out = out_dir or cfg.output or os.environ.get(ENV_OUT, "reports")
    results = {}
    errors = {}

    def one(name):
        return name, _RUNNERS[name](cfg, cfg.suites[name])

    names = list(cfg.suites)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(one, n): n for n in names}
            for fut in futures:
                n = futures[fut]
                try:
                    results[n] = fut.result()[1]
                except Exception as exc:  # isolate suite failures
                    errors[n] = repr(exc)
                    if fail_fast:
                        raise
    else:
        for n in names:
            try:
                results[n] = one(n)[1]
            except Exception as exc:
                errors[n] = repr(exc)
                if fail_fast:
                    raise
    # report writing is serialized here
    for name, res in sorted(results.items()):
        write_json(os.path.join(out, f"{name}.json"), res["payload"])
        header, rows = res["csv"]
        write_csv(os.path.join(out, f"{name}.csv"), header, rows)
    verdicts = {n: res["payload"]["verdict"] for n, res in results.items()}
    for n, msg in errors.items():
        verdicts[n] = f"ERROR: {msg}"
    counts = {
        PASS: sum(v == PASS for v in verdicts.values()),
        INCONCLUSIVE: sum(v == INCONCLUSIVE for v in verdicts.values()),
        VIOLATION: sum(v == VIOLATION for v in verdicts.values()),
        "ERROR": len(errors),
    }
    summary = {
        "config": cfg.source_path,
        "seed": cfg.seed,
        "suites": verdicts,
        "counts": counts,
        "meta": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")},
    }
    write_json(os.path.join(out, "summary.json"), summary)
    if counts[VIOLATION] or errors:
        return 1
    return 0


def list_suites(as_json: bool = False) -> str:
    if as_json:
        return json.dumps({k: {"verifies": v[0], "required": v[1]}
                           for k, v in SUITE_CATALOG.items()},
                          sort_keys=True, indent=1)
    lines = []
    for name, (what, req) in SUITE_CATALOG.items():
        lines.append(f"{name}\n  verifies: {what}\n  config:   {req}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bsderisk",
        description="run inequality-verification suites for BSDE risk measures")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a config")
    p_run.add_argument("config")
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--fail-fast", action="store_true")
    p_run.add_argument("--out", default=None)
    p_list = sub.add_parser("list-suites", help="print the suite catalog")
    p_list.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)
    if args.command == "list-suites":
        print(list_suites(as_json=args.json))
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError:
        print(f"config not found: {args.config}", file=sys.stderr)
        return 2
    return run(cfg, out_dir=args.out, jobs=args.jobs, fail_fast=args.fail_fast)


if __name__ == "__main__":
    sys.exit(main())
