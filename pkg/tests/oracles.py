"""Independent oracles for the test suite.

Everything here deliberately avoids the package's own computational paths:
brute-force conjugates by grid search, backward induction on a binomial
tree, the exponential-transform closed form for quadratic drivers, and a
direct CDF integral for 1-d transport.  Oracle values frozen into tests
were produced by these routines.
"""

import math

import numpy as np


# ---------------------------------------------------------------------------
# numeric Legendre transform (grid + golden-section refinement)

def numeric_conjugate(g_of_yz, beta, q, b_cap, radius=None, n_grid=4001):
    """sup_{y,z} (-beta y + q z - g(y, z)) for scalar z by brute force.

    ``g_of_yz(y, z)`` is scalar; the y supremum is scanned over a wide grid
    (it is +inf outside [0, b] for the generators used in tests, so the
    caller passes the admissible beta).  Returns +inf when the scan keeps
    increasing at the boundary.
    """
    q = float(q)
    if radius is None:
        radius = 10.0 * (abs(q) + 1.0) + 5.0
    zs = np.linspace(-radius, radius, n_grid)
    ys = np.linspace(-50.0, 50.0, 801)
    vals = np.array([np.max(-beta * ys + q * z - g_of_yz(ys, z)) for z in zs])
    k = int(np.argmax(vals))
    if k in (0, n_grid - 1):
        edge = max(vals[0], vals[-1])
        inner = vals[1:-1].max()
        if edge > inner + 1e-9:
            return math.inf
    # golden-section refinement around the best z for smooth kinds
    lo = zs[max(k - 1, 0)]
    hi = zs[min(k + 1, n_grid - 1)]
    gr = (math.sqrt(5) - 1) / 2

    def val(z):
        return float(np.max(-beta * ys + q * z - g_of_yz(ys, z)))

    a, b2 = lo, hi
    c, d = b2 - gr * (b2 - a), a + gr * (b2 - a)
    fc, fd = val(c), val(d)
    for _ in range(80):
        if fc >= fd:
            b2, d, fd = d, c, fc
            c = b2 - gr * (b2 - a)
            fc = val(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b2 - a)
            fd = val(d)
    return max(fc, fd)


def numeric_bound_conjugate(l, r, lam_hi=100.0, n=200001):
    """Grid-search sup_{lam in [0, lam_hi]} (lam r - l(lam))."""
    lams = np.linspace(0.0, lam_hi, n)
    return float(np.max(lams * r - l(lams)))


# ---------------------------------------------------------------------------
# exponential-transform closed form for y-free quadratic drivers

def cole_hopf_value(x_samples, a, c):
    """Value of the generator a + c|z|^2 on claim samples:
    aT + (1/2c) log E[e^{2cX}] with T folded in by the caller via a*T."""
    x = np.asarray(x_samples, dtype=float)
    s = 2.0 * c * x
    shift = s.max()
    return float(np.log(np.mean(np.exp(s - shift))) + shift) / (2.0 * c)


# ---------------------------------------------------------------------------
# binomial-tree backward induction for y-free Lipschitz drivers

def tree_value(g_of_z, n_steps, horizon, claim, lam=1.0):
    """Backward BSDE induction on the symmetric random walk.

    ``claim`` is one of 'terminal', 'abs_terminal', 'running_max', or a
    callable mapping (w, m) arrays to payoffs.  Path dependence is carried
    by the running-max state; the scheme is
    Y = (Y_up + Y_down)/2 + dt * g(Z), Z = (Y_up - Y_down)/(2 sqrt(dt)).
    """
    dt = horizon / n_steps
    sdt = math.sqrt(dt)

    def payoff(w, m):
        if claim == "terminal":
            return lam * w
        if claim == "abs_terminal":
            return lam * np.abs(w)
        if claim == "running_max":
            return lam * m
        return lam * claim(w, m)

    if claim in ("terminal", "abs_terminal"):
        # path independent: state is the walk value only
        w = (2 * np.arange(n_steps + 1) - n_steps) * sdt
        y = payoff(w, None)
        for k in range(n_steps - 1, -1, -1):
            up, down = y[1:k + 2], y[0:k + 1]
            z = (up - down) / (2.0 * sdt)
            y = 0.5 * (up + down) + dt * g_of_z(z)
        return float(y[0])

    # running-max state: level k has walk index i (w = (2i-k) sdt) and
    # max index j (m = j sdt, j >= max(0, 2i-k))
    k = n_steps
    i_idx = np.arange(k + 1)
    j_idx = np.arange(k + 1)
    w = (2 * i_idx[:, None] - k) * sdt
    m = (j_idx[None, :] * sdt) * np.ones((k + 1, 1))
    y = payoff(w, m)
    for k in range(n_steps - 1, -1, -1):
        i = np.arange(k + 1)
        j = np.arange(k + 1)
        # up move: i -> i+1 at level k+1; new max index max(j, 2(i+1)-(k+1))
        walk_up = 2 * (i[:, None] + 1) - (k + 1)
        j_up = np.maximum(j[None, :], walk_up)
        y_up = y[(i[:, None] + 1), j_up]
        y_down = y[i[:, None], j[None, :]]
        z = (y_up - y_down) / (2.0 * sdt)
        y = 0.5 * (y_up + y_down) + dt * g_of_z(z)
    return float(y[0, 0])


# ---------------------------------------------------------------------------
# 1-d Wasserstein-1 by direct CDF integration (independent of the package)

def w1_cdf_oracle(x, wx, y, wy):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    pts = np.unique(np.concatenate([x, y]))
    if len(pts) < 2:
        return 0.0
    fx = np.array([wx[x <= p].sum() for p in pts])
    fy = np.array([wy[y <= p].sum() for p in pts])
    return float(np.sum(np.abs(fx - fy)[:-1] * np.diff(pts)))


# ---------------------------------------------------------------------------
# quantization budget sweep (regenerates transport.QUANTIZATION_BUDGET)

def quantization_budget_sweep(n_atoms, n_cases=400, seed=123):
    """Worst h(W1) - KL over random Gaussian reweightings of the quantized
    reference; the shipped budget must dominate this with margin."""
    from bsderisk.transport import (gaussian_quantization, gaussian_reweight,
                                    kl_divergence, wasserstein1)
    rng = np.random.default_rng(seed)
    ref = gaussian_quantization(n_atoms)
    worst = -math.inf
    for _ in range(n_cases):
        mean = rng.uniform(-1.0, 1.0)
        sd = rng.uniform(0.7, 1.5)
        mu = gaussian_reweight(ref, mean, sd)
        w1 = wasserstein1(mu, ref)
        kl = kl_divergence(mu, ref)
        worst = max(worst, 0.5 * w1 * w1 - kl)
    return worst
