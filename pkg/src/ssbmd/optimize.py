"""Power-constrained rate maximization for ASK over the discretized AWGN channel.

``cm_capacity`` maximizes I(B;Q) jointly over P_B and the scaling d,
``bs_bicm_rate`` does the same for sum_i I(B_i;Q) over product distributions,
``uniform_bicm_rate`` optimizes d only. Each outer problem is a golden-section
line search over d; the power budget for the inner problem at scaling d is
SNR / d^2 (in units of the unscaled constellation).
"""

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize

from .channel import discretize
from .constellation import Constellation, ScaledConstellation, second_moment
from .infotheory import (
    LabelDistribution,
    bicm_sum_rate,
    db,
    entropy,
    mutual_information,
    shannon_capacity,
    ss_bmd_rate,
    undb,
)

LN2 = math.log(2.0)
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

BA_TOL = 1e-7
D_TOL = 1e-5
GOLDEN_MAX_ITER = 120
BA_MAX_ITER = 20000
BA_POLISH_AFTER = 200
D_MIN = 1e-3
DEFAULT_RESTARTS = 8


class ConvergenceError(RuntimeError):
    pass


class BracketError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


@dataclass
class OptimizationResult:
    rate: float
    d_star: float
    dist_star: LabelDistribution
    iterations: int
    converged: bool
    residual: float
    snr: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def snr_db(self):
        return float(db(self.snr))

    @property
    def power(self):
        return self.d_star**2 * second_moment(self.dist_star, Constellation(self.dist_star.m))


def _constellation(m, labeling):
    if isinstance(labeling, Constellation):
        return labeling
    return Constellation(m, labeling)


def _channel_matrix(const, d, num_bins):
    return discretize(ScaledConstellation(const, d), num_bins).transition


def _d_upper(const, snr, dist=None):
    """Right end of the line-search bracket: the design bracket
    4 sqrt(SNR) / x_rms clipped to the largest feasible scaling."""
    cost = const.amplitudes.astype(float) ** 2
    x_rms = math.sqrt(cost.mean())
    feasible = math.sqrt(snr / (cost.min() if dist is None else dist.pmf @ cost))
    return min(4.0 * math.sqrt(snr) / x_rms, feasible)


def golden_max(f, lo, hi, tol=D_TOL, max_iter=GOLDEN_MAX_ITER, check_ends=True, extra=()):
    """Maximize a unimodal ``f`` on [lo, hi].

    Returns ``(x, f(x), payload, iterations, bracket_converged)``. ``f`` may
    return ``(value, payload)``; the payload of the best point is kept. Points
    in ``extra`` are evaluated as additional candidates.
    """
    cache = {}

    def ev(x):
        if x not in cache:
            out = f(x)
            cache[x] = out if isinstance(out, tuple) else (out, None)
        return cache[x][0]

    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = ev(c), ev(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = ev(d)
        it += 1
    if check_ends:
        ev(hi)
    for x in extra:
        if lo <= x <= hi:
            ev(x)
    best = max(cache, key=lambda x: cache[x][0])
    return best, cache[best][0], cache[best][1], it, (b - a) <= tol


# ---------------------------------------------------------------------------
# Blahut-Arimoto with an average-cost constraint


class _Divergences:
    """D(W_b || p W) for all rows b, in nats."""

    def __init__(self, W):
        self.W = W
        with np.errstate(divide="ignore", invalid="ignore"):
            self.neg_entropy = np.where(W > 0, W * np.log(W), 0.0).sum(axis=1)

    def __call__(self, p):
        q = p @ self.W
        logq = np.log(np.where(q > 0, q, 1.0))
        return self.neg_entropy - self.W @ logq


def _tilt(a, cost, budget, s0=0.0):
    """Find s >= 0 with E_w[cost] = budget for w ~ exp(a - s cost).

    Returns (s, w). Safeguarded Newton inside a bisection bracket.
    """

    def weights(s):
        z = a - s * cost
        w = np.exp(z - z.max())
        return w / w.sum()

    w = weights(0.0)
    if w @ cost <= budget:
        return 0.0, w
    lo, hi = 0.0, max(s0, 1e-3)
    while True:
        w = weights(hi)
        if w @ cost <= budget:
            break
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            raise InfeasibleError("power budget below the cheapest support point")
    s = min(max(s0, lo), hi) if s0 > 0 else 0.5 * (lo + hi)
    for _ in range(200):
        w = weights(s)
        mean = w @ cost
        g = mean - budget
        if abs(g) <= 1e-13 * budget:
            break
        if g > 0:
            lo = s
        else:
            hi = s
        var = w @ (cost - mean) ** 2
        step = s + g / var if var > 0 else 0.5 * (lo + hi)
        s = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, hi):
            s = hi
            w = weights(s)
            break
    if w @ cost > budget * (1 + 1e-12):
        # stay on the feasible side of the bracket
        s = hi
        w = weights(hi)
    return s, w


@dataclass
class BAResult:
    capacity: float
    pmf: np.ndarray
    multiplier: float
    iterations: int
    gap: float
    converged: bool
    lower_bounds: list = field(default_factory=list)


def _slsqp_polish(p, div, cost, budget):
    """Quasi-Newton solve of the same concave program from ``p``.

    I(P) is nearly flat along the power constraint in the low-SNR regime,
    where the multiplicative update crawls; a second-order method crosses
    that valley in a few dozen steps. dI/dP(b) = D_b - 1 in nats.
    """

    def objective(x):
        x = np.maximum(x, 0.0)
        D = div(x)
        return -(x @ D), -(D - 1.0)

    n = len(p)
    res = minimize(
        objective,
        p,
        jac=True,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * n,
        constraints=[
            {"type": "eq", "fun": lambda x: x.sum() - 1.0, "jac": lambda x: np.ones(n)},
            {"type": "ineq", "fun": lambda x: budget - cost @ x, "jac": lambda x: -cost},
        ],
        options={"ftol": 1e-16, "maxiter": 500},
    )
    x = np.maximum(res.x, 0.0)
    x = x / x.sum()
    if cost @ x > budget:
        _, x = _tilt(np.log(np.maximum(x, 1e-300)), cost, budget)
    return x


def blahut_arimoto_power(W, cost, budget, p0=None, tol=BA_TOL, max_iter=BA_MAX_ITER, record=False):
    """max_P I(P; W) subject to sum_b P(b) cost_b <= budget.

    Each iteration applies the Blahut-Arimoto update p(b) exp(D_b - s cost_b)
    with the multiplier s re-solved so that the updated input meets the
    budget. The returned gap is the duality gap in bits,
    max_b(D_b - s cost_b) + s budget - I(P), which certifies the result.

    If the gap is still open after ``BA_POLISH_AFTER`` iterations the
    iterate is handed once to an SLSQP solve and kept only if it carries
    more information, so the recorded lower bounds never decrease.
    """
    W = np.asarray(W, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if budget < cost.min() * (1 - 1e-12):
        raise InfeasibleError("power budget below the cheapest input")
    budget = max(budget, cost.min())
    div = _Divergences(W)
    n = W.shape[0]
    p = np.full(n, 1.0 / n) if p0 is None else np.asarray(p0, dtype=float)
    p = 0.999 * p / p.sum() + 0.001 / n
    s, p = _tilt(np.log(p), cost, budget)
    D = div(p)
    lower = p @ D
    lower_bounds = []
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        if record:
            lower_bounds.append(lower / LN2)
        s, w = _tilt(np.log(np.maximum(p, 1e-300)) + D, cost, budget, s)
        upper = np.max(D - s * cost) + s * budget
        gap = (upper - lower) / LN2
        if gap < tol:
            break
        if it == BA_POLISH_AFTER:
            x = _slsqp_polish(p, div, cost, budget)
            D_x = div(x)
            if x @ D_x > lower:
                p, D, lower = x, D_x, x @ D_x
                continue
        D = div(w)
        p, lower = w, w @ D
    capacity = float(lower / LN2)
    return BAResult(capacity, p, s, it, float(gap), bool(gap < tol), lower_bounds)


# ---------------------------------------------------------------------------
# outer problems


def cm_capacity(m, labeling=None, snr_linear=1.0, num_bins=512, tol=BA_TOL):
    """CM capacity: max over (P_B, d) of I(B;Q) with d^2 E[x_B^2] <= SNR."""
    if not snr_linear > 0:
        raise ValueError("SNR must be positive")
    const = _constellation(m, labeling)
    cost = const.amplitudes.astype(float) ** 2
    warm = {"p": None}
    total_ba = [0]

    def inner(d):
        W = _channel_matrix(const, d, num_bins)
        res = blahut_arimoto_power(W, cost, snr_linear / d**2, p0=warm["p"], tol=tol)
        warm["p"] = res.pmf
        total_ba[0] += res.iterations
        return res.capacity, res

    d_hi = _d_upper(const, snr_linear)
    d, _, res, it, bracket_ok = golden_max(inner, D_MIN, d_hi)
    pmf = res.pmf
    power = d**2 * (pmf @ cost)
    if power > snr_linear:
        d = math.sqrt(snr_linear / (pmf @ cost))
    dist = LabelDistribution(const.m, pmf / pmf.sum())
    ch = discretize(ScaledConstellation(const, d), num_bins)
    return OptimizationResult(
        rate=mutual_information(dist, ch),
        d_star=d,
        dist_star=dist,
        iterations=it,
        converged=bool(res.converged and bracket_ok),
        residual=res.gap,
        snr=snr_linear,
        extra={"ba_iterations": total_ba[0], "multiplier": res.multiplier},
    )


def uniform_bicm_rate(m, labeling=None, snr_linear=1.0, num_bins=512):
    """Uniform BICM: sum_i I(B_i;Q) with uniform labels, line search over d."""
    if not snr_linear > 0:
        raise ValueError("SNR must be positive")
    const = _constellation(m, labeling)
    dist = LabelDistribution.uniform(const.m)

    def f(d):
        return bicm_sum_rate(dist, discretize(ScaledConstellation(const, d), num_bins))

    d_hi = _d_upper(const, snr_linear, dist)
    d, rate, _, it, ok = golden_max(f, D_MIN, d_hi)
    return OptimizationResult(rate, d, dist, it, ok, 0.0, snr=snr_linear)


class _BitLevelObjective:
    """sum_i I(B_i;Q) of a product distribution at the scaling that exhausts
    the power budget (the rate of a fixed P_B never decreases with d)."""

    def __init__(self, const, snr, num_bins):
        m = const.m
        self.const = const
        self.m = m
        self.snr = snr
        self.num_bins = num_bins
        self.cost = const.amplitudes.astype(float) ** 2
        self.d_max = _d_upper(const, snr)
        self.bits = (np.arange(2**m)[:, None] >> np.arange(m - 1, -1, -1)) & 1
        self.selector = self.bits.T.astype(float)
        self.evals = 0

    def pmf(self, p_one):
        return np.prod(np.where(self.bits == 1, p_one, 1.0 - p_one), axis=1)

    def scaling(self, p_one):
        return min(math.sqrt(self.snr / (self.pmf(p_one) @ self.cost)), self.d_max)

    def rate(self, p_one):
        # I(B_i;Q) = H(B_i) + H(Q) - H(B_i, Q), all levels at once
        self.evals += 1
        pmf = self.pmf(p_one)
        W = _channel_matrix(self.const, self.scaling(p_one), self.num_bins)
        joint = pmf[:, None] * W
        py = joint.sum(axis=0)
        j1 = self.selector @ joint
        j0 = np.maximum(py - j1, 0.0)
        pb1 = self.selector @ pmf
        h_bits = _neg_xlogx(np.stack([pb1, 1.0 - pb1])).sum()
        return float(h_bits + self.m * _neg_xlogx(py).sum() - _neg_xlogx(j0).sum() - _neg_xlogx(j1).sum())


def _neg_xlogx(x):
    pos = x > 0
    return -np.where(pos, x * np.log2(np.where(pos, x, 1.0)), 0.0)


def coordinate_ascent(obj, p0, tol=1e-11, max_cycles=200, p_tol=1e-7):
    """Cyclic coordinate ascent of ``obj.rate`` over p in [0, 1]^m.

    Each coordinate is maximized by golden-section search (endpoints
    included). Returns (p, rate, cycles).
    """
    p = np.clip(np.array(p0, dtype=float), 0.0, 1.0)
    best = obj.rate(p)
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        start = best
        for i in range(obj.m):

            def f(t, i=i):
                q = p.copy()
                q[i] = t
                return obj.rate(q)

            t, val, _, _, _ = golden_max(f, 0.0, 1.0, tol=p_tol, extra=(0.0, p[i]))
            if val > best:
                p[i] = t
                best = val
        if best - start < tol:
            break
    return p, best, cycles


def bs_bicm_rate(m, labeling=None, snr_linear=1.0, num_bins=512, num_restarts=DEFAULT_RESTARTS, seed=0):
    """Bit-shaped BICM: max of sum_i I(B_i;Q) over product P_B and d.

    For a fixed P_B the best scaling uses the whole power budget, so d is
    tied to the bit probabilities and the search runs over p only: cyclic
    coordinate ascent from the uniform point plus ``num_restarts - 1``
    seeded random points, keeping the best local optimum.
    """
    if not snr_linear > 0:
        raise ValueError("SNR must be positive")
    if num_restarts < 1:
        raise ValueError("need at least one restart")
    const = _constellation(m, labeling)
    rng = np.random.default_rng(seed)
    obj = _BitLevelObjective(const, snr_linear, num_bins)
    starts = [np.full(const.m, 0.5)] + [rng.uniform(0, 1, const.m) for _ in range(num_restarts - 1)]
    best_p, best_rate, total_cycles = None, -np.inf, 0
    for p0 in starts:
        p, rate, cycles = coordinate_ascent(obj, p0)
        total_cycles += cycles
        if rate > best_rate:
            best_p, best_rate = p, rate
    dist = LabelDistribution.from_bit_probs(best_p)
    d = obj.scaling(best_p)
    if d**2 * second_moment(dist, const) > snr_linear:
        d = math.sqrt(snr_linear / second_moment(dist, const))
    ch = discretize(ScaledConstellation(const, d), num_bins)
    return OptimizationResult(
        rate=bicm_sum_rate(dist, ch),
        d_star=d,
        dist_star=dist,
        iterations=total_cycles,
        converged=total_cycles < 200 * num_restarts,
        residual=0.0,
        snr=snr_linear,
        extra={"bit_probs": best_p.tolist(), "objective_evals": obj.evals},
    )


def ss_bmd_heuristic(m, labeling=None, snr_linear=1.0, num_bins=512, cm=None):
    """SS-BMD rate evaluated at the CM-optimal (P_B, d); no further search."""
    const = _constellation(m, labeling)
    if cm is None:
        cm = cm_capacity(const.m, const, snr_linear, num_bins)
    ch = discretize(ScaledConstellation(const, cm.d_star), num_bins)
    rate = ss_bmd_rate(cm.dist_star, ch)
    return OptimizationResult(
        rate=rate,
        d_star=cm.d_star,
        dist_star=cm.dist_star,
        iterations=cm.iterations,
        converged=cm.converged,
        residual=cm.residual,
        snr=snr_linear,
        extra={"cm_rate": cm.rate},
    )


def rate_at_fixed_distribution(dist, const, snr_linear, num_bins=512, functional=ss_bmd_rate):
    """Rate of a fixed P_B with d set to exhaust the power budget."""
    d = math.sqrt(snr_linear / second_moment(dist, const))
    return functional(dist, discretize(ScaledConstellation(const, d), num_bins))


# ---------------------------------------------------------------------------
# curve inversion and dB gaps


def shannon_snr_db(rate):
    return float(db(2.0 ** (2.0 * rate) - 1.0))


def snr_for_rate(curve, target_rate, lo_db=None, hi_db=None, rate_tol=1e-6, max_db=60.0):
    """SNR in dB where a nondecreasing ``curve(snr_db)`` reaches ``target_rate``.

    Without an explicit bracket, the search starts at the Shannon limit for
    the target (no ASK curve can reach the rate earlier) and widens upwards.
    The root is found by Brent's method, a bisection-safeguarded secant
    iteration.
    """
    if lo_db is None:
        lo_db = shannon_snr_db(target_rate) if target_rate > 0 else -40.0
    values = {}

    def g(x):
        if x not in values:
            values[x] = curve(x) - target_rate
        return values[x]

    if g(lo_db) > 0:
        raise BracketError(f"curve already exceeds {target_rate} at {lo_db:.4f} dB")
    if hi_db is None:
        step = 1.0
        hi_db = lo_db + step
        while g(hi_db) < 0:
            lo_db, hi_db, step = hi_db, hi_db + step, 2 * step
            if hi_db > max_db:
                raise BracketError(f"curve does not reach {target_rate} below {max_db} dB")
    elif g(hi_db) < 0:
        raise BracketError(f"curve stays below {target_rate} up to {hi_db:.4f} dB")
    if g(lo_db) == 0:
        return lo_db
    x = brentq(g, lo_db, hi_db, xtol=1e-9, rtol=1e-12, maxiter=200)
    if abs(g(x)) > rate_tol:
        # Brent stops on the abscissa; refine by bisection on the residual
        a, b = (lo_db, hi_db)
        for _ in range(200):
            x = 0.5 * (a + b)
            if abs(g(x)) <= rate_tol:
                break
            if g(x) < 0:
                a = x
            else:
                b = x
    return float(x)


def gap_db(curve_a, curve_b, rate, **kw):
    """Horizontal gap snr_a(rate) - snr_b(rate) in dB."""
    return snr_for_rate(curve_a, rate, **kw) - snr_for_rate(curve_b, rate, **kw)


def curve(kind, m=3, labeling=None, num_bins=512, **kw):
    """Rate-versus-SNR(dB) callable for one of the named curves."""
    const = _constellation(m, labeling)

    def shannon(x):
        return float(shannon_capacity(undb(x)))

    def cm(x):
        return cm_capacity(const.m, const, float(undb(x)), num_bins).rate

    def ss(x):
        return ss_bmd_heuristic(const.m, const, float(undb(x)), num_bins).rate

    def bs(x):
        return bs_bicm_rate(const.m, const, float(undb(x)), num_bins, **kw).rate

    def uni(x):
        return uniform_bicm_rate(const.m, const, float(undb(x)), num_bins).rate

    table = {"shannon": shannon, "cm": cm, "ss_bmd": ss, "bicm_shaped": bs, "bicm_uniform": uni}
    if kind not in table:
        raise ValueError(f"unknown curve {kind!r}; choose from {sorted(table)}")
    return table[kind]


# ---------------------------------------------------------------------------
# dot analysis


@dataclass(frozen=True)
class RatePoint:
    snr_db: float
    rate: float
    dist: LabelDistribution
    d: float


@dataclass(frozen=True)
class DotAnalysis:
    cm: RatePoint
    ss_bmd: RatePoint
    marginal_bicm: RatePoint

    @property
    def rate_gain(self):
        """BICM rate at the marginal product minus the SS-BMD rate."""
        return self.marginal_bicm.rate - self.ss_bmd.rate

    @property
    def snr_loss_db(self):
        return self.marginal_bicm.snr_db - self.ss_bmd.snr_db


def dot_analysis(m=3, labeling=None, snr_db=None, num_bins=512):
    """Compare CM, SS-BMD and marginal-product BICM at one CM-optimal scaling.

    ``snr_db`` defaults to the SNR where the CM capacity is 2 bits/use.
    """
    const = _constellation(m, labeling)
    if snr_db is None:
        snr_db = snr_for_rate(curve("cm", const.m, const, num_bins), 2.0)
    snr = float(undb(snr_db))
    cm = cm_capacity(const.m, const, snr, num_bins)
    d = cm.d_star
    ch = discretize(ScaledConstellation(const, d), num_bins)
    p = cm.dist_star
    prod = p.marginal_product()
    own_snr_db = float(db(d**2 * second_moment(p, const)))
    prod_snr_db = float(db(d**2 * second_moment(prod, const)))
    return DotAnalysis(
        cm=RatePoint(own_snr_db, mutual_information(p, ch), p, d),
        ss_bmd=RatePoint(own_snr_db, ss_bmd_rate(p, ch), p, d),
        marginal_bicm=RatePoint(prod_snr_db, bicm_sum_rate(prod, ch), prod, d),
    )


# ---------------------------------------------------------------------------
# entropy-constrained divergence projection


def tilt(target, lam):
    """P(a) proportional to target(a)^lam on the support of ``target``."""
    target = np.asarray(target, dtype=float)
    out = np.zeros_like(target)
    pos = target > 0
    logp = lam * np.log(target[pos])
    w = np.exp(logp - logp.max())
    out[pos] = w / w.sum()
    return out


def kl_project_entropy(target, h_min, tol=1e-9):
    """argmin_P D(P || target) subject to H(P) >= h_min.

    The minimizer is the tilted distribution target^lam / Z; lam in [0, 1]
    is found by bisection so that H(P) = h_min. Returns (pmf, lam).
    """
    target = np.asarray(target, dtype=float)
    h0 = entropy(target)
    support = int(np.count_nonzero(target))
    h_max = math.log2(support)
    if h_min > h_max + 1e-12:
        raise InfeasibleError(f"entropy {h_min} exceeds log2 of the support size ({h_max:.6f})")
    if h0 >= h_min:
        return target.copy(), 1.0
    if h_min >= h_max - 1e-12:
        return tilt(target, 0.0), 0.0
    lo, hi = 0.0, 1.0  # H(lo) >= h_min > H(hi)
    h_lo, h_hi = h_max, h0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h_mid = entropy(tilt(target, mid))
        if not h_hi - 1e-12 <= h_mid <= h_lo + 1e-12:
            raise ArithmeticError("tilted entropy is not monotone in the exponent")
        if abs(h_mid - h_min) <= tol:
            return tilt(target, mid), mid
        if h_mid > h_min:
            lo, h_lo = mid, h_mid
        else:
            hi, h_hi = mid, h_mid
    mid = 0.5 * (lo + hi)
    return tilt(target, mid), mid


# ---------------------------------------------------------------------------
# sweeps


CURVES = ("cm", "bicm_shaped", "bicm_uniform", "ss_bmd", "shannon")
SWEEP_COLUMNS = ("snr_db",) + CURVES


def sweep_point(m, labeling, snr_db, num_bins=512, num_restarts=DEFAULT_RESTARTS, seed=0):
    const = _constellation(m, labeling)
    snr = float(undb(snr_db))
    cm = cm_capacity(const.m, const, snr, num_bins)
    return {
        "snr_db": float(snr_db),
        "cm": cm.rate,
        "bicm_shaped": bs_bicm_rate(const.m, const, snr, num_bins, num_restarts, seed).rate,
        "bicm_uniform": uniform_bicm_rate(const.m, const, snr, num_bins).rate,
        "ss_bmd": ss_bmd_heuristic(const.m, const, snr, num_bins, cm=cm).rate,
        "shannon": float(shannon_capacity(snr)),
        "converged": cm.converged,
    }


def _sweep_job(args):
    return sweep_point(*args)


def _cache_key(m, labeling, num_bins, grid, num_restarts, seed):
    blob = json.dumps(
        {
            "m": m,
            "labeling": [int(x) for x in labeling],
            "num_bins": num_bins,
            "grid": [round(float(x), 12) for x in grid],
            "restarts": num_restarts,
            "seed": seed,
        },
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def default_cache_dir():
    return Path(os.environ.get("SSBMD_CACHE", Path.home() / ".cache" / "ssbmd"))


def rate_sweep(m, labeling=None, snr_grid_db=(), num_bins=512, num_restarts=DEFAULT_RESTARTS,
               seed=0, workers=1, cache_dir=None):
    """All five curves on an SNR grid; results are cached on disk by input."""
    const = _constellation(m, labeling)
    grid = [float(x) for x in snr_grid_db]
    path = None
    if cache_dir is not None:
        key = _cache_key(const.m, const.labeling, num_bins, grid, num_restarts, seed)
        path = Path(cache_dir) / f"sweep-{key}.json"
        if path.exists():
            return json.loads(path.read_text())
    jobs = [(const.m, const.labeling, x, num_bins, num_restarts, seed) for x in grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(rows))
        tmp.replace(path)
    return rows
