"""Statistical verdicts, confidence intervals and report serialization.

Inequality checks are Monte Carlo based, so verdicts are three-valued:
``PASS`` inside the 3-sigma band, ``VIOLATION`` only for a 5-sigma breach
reproduced under a second seed, everything between is
``STATISTICALLY-INCONCLUSIVE``.
"""

from __future__ import annotations

import csv
import json
import math
import pathlib
from typing import Callable, Optional

import numpy as np

PASS = "PASS"
INCONCLUSIVE = "STATISTICALLY-INCONCLUSIVE"
VIOLATION = "VIOLATION"

__all__ = [
    "PASS", "INCONCLUSIVE", "VIOLATION",
    "verdict", "wilson_interval", "bootstrap_median_interval",
    "write_json", "write_csv", "combine_verdicts",
]


def verdict(margin: float, sigma: float, bias: float = 0.0,
            recheck: Optional[Callable[[], float]] = None) -> str:
    """Classify a one-sided margin (>= 0 means the inequality holds).

    ``sigma`` is the combined standard error, ``bias`` an additive budget
    for deterministic (discretization/regression) error.  ``recheck``
    recomputes the margin under an independent seed and is consulted only
    for 5-sigma breaches.
    """
    if not math.isfinite(margin):
        return PASS if margin > 0 else VIOLATION
    if margin >= -(3.0 * sigma + bias):
        return PASS
    if margin >= -(5.0 * sigma + bias):
        return INCONCLUSIVE
    if recheck is None:
        return INCONCLUSIVE
    second = recheck()
    return VIOLATION if second < -(5.0 * sigma + bias) else INCONCLUSIVE


def combine_verdicts(verdicts) -> str:
    vs = list(verdicts)
    if any(v == VIOLATION for v in vs):
        return VIOLATION
    if any(v == INCONCLUSIVE for v in vs):
        return INCONCLUSIVE
    return PASS


def wilson_interval(successes: int, trials: int, z: float = 1.96):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def bootstrap_median_interval(x: np.ndarray, n_boot: int = 200,
                              seed: int = 0, level: float = 0.95):
    """Percentile bootstrap interval for the sample median."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed) + 99))
    m = x.size
    meds = np.empty(n_boot)
    for b in range(n_boot):
        meds[b] = np.median(x[rng.integers(0, m, m)])
    lo = float(np.quantile(meds, (1 - level) / 2))
    hi = float(np.quantile(meds, 1 - (1 - level) / 2))
    return lo, hi


# ---------------------------------------------------------------------------
# deterministic serialization

def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, payload: dict) -> None:
    """Byte-deterministic JSON: sorted keys, no timestamps outside 'meta'."""
    p = pathlib.Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=1) + "\n",
                 encoding="utf-8")


def write_csv(path, header, rows) -> None:
    """RFC-4180-style CSV with a mandatory header row, UTF-8."""
    p = pathlib.Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
