"""Acceptance criteria 1-9, each at its stated tolerance.

Every criterion prints one line ``criterion N: PASS|FAIL  <details>``. Run
``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or ``python tests/test_acceptance.py``.
"""

import math
import os
import sys
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import oracles  # noqa: E402
from ssbmd.channel import discretize  # noqa: E402
from ssbmd.constellation import Constellation, ScaledConstellation  # noqa: E402
from ssbmd.fec import bundled_code, decode_bp, encode_systematic  # noqa: E402
from ssbmd.infotheory import (  # noqa: E402
    LabelDistribution,
    entropy,
    joint_mi,
    kl_divergence,
    mutual_information,
    ss_bmd_rate,
    undb,
)
from ssbmd.matcher import (  # noqa: E402
    MatcherSpec,
    OverflowModel,
    dematch_blocks,
    information_variance,
    match_blocks,
    overflow_prob_clt,
    overflow_prob_mc,
)
from ssbmd.optimize import (  # noqa: E402
    cm_capacity,
    curve,
    dot_analysis,
    gap_db,
    kl_project_entropy,
    rate_at_fixed_distribution,
    rate_sweep,
    snr_for_rate,
)
from ssbmd.txrx import (  # noqa: E402
    INTERLEAVERS,
    FrameLayout,
    adapted_target,
    count_errors,
    make_interleaver,
    make_link,
    operating_point,
    simulate_batch,
    transmit_frames,
)

# sub-label pmfs indexed by 2 b2 + b3 (labels 00, 01, 10, 11)
P_STAR = np.array([0.0579, 0.1507, 0.4676, 0.3237])
P_ADAPT = np.array([0.0722, 0.1654, 0.4415, 0.3209])
LAMBDA = 0.8672

RESULTS = {}


class Check:
    def __init__(self):
        self.items = []

    def __call__(self, name, ok, detail=""):
        self.items.append((name, bool(ok), detail))

    @property
    def ok(self):
        return all(ok for _, ok, _ in self.items)

    def summary(self):
        return "; ".join(f"{name} {'ok' if ok else 'FAILED'} ({detail})" if detail else f"{name} {'ok' if ok else 'FAILED'}"
                         for name, ok, detail in self.items)


def _close(value, ref, tol):
    return abs(value - ref) <= tol


# ---------------------------------------------------------------------------


def criterion_1(c):
    x = snr_for_rate(curve("cm"), 2.0)
    c("CM crossing", _close(x, 11.848, 0.02), f"{x:.4f} dB, want 11.848 +- 0.02")


def criterion_2(c):
    g = gap_db(curve("ss_bmd"), curve("cm"), 2.0)
    c("SS-BMD gap", g <= 0.02, f"{g:.4f} dB, want <= 0.02")


def criterion_3(c):
    g = gap_db(curve("bicm_shaped"), curve("cm"), 2.0)
    c("BS-BICM gap", _close(g, 0.16, 0.03), f"{g:.4f} dB, want 0.16 +- 0.03")
    u = gap_db(curve("bicm_uniform"), curve("ss_bmd"), 2.0)
    c("uniform vs SS-BMD", _close(u, 0.87, 0.05), f"{u:.4f} dB, want 0.87 +- 0.05")


def criterion_4(c):
    res = cm_capacity(3, None, float(undb(11.848)))
    sub = res.dist_star.sub_pmf()
    dev = np.max(np.abs(sub - P_STAR))
    c("P*_S", dev <= 1e-3, f"got {np.round(sub, 4).tolist()}, max dev {dev:.4f}, want <= 1e-3")
    target = P_STAR / P_STAR.sum()
    pmf, lam = kl_project_entropy(target, 1.75)
    c("lambda", _close(lam, LAMBDA, 5e-4), f"{lam:.5f}")
    dev = np.max(np.abs(pmf - P_ADAPT))
    c("P_S", dev <= 1e-3, f"max dev {dev:.5f}")
    const = Constellation(3)
    snr = {}
    for name, p in (("target", target), ("adapted", pmf)):
        dist = LabelDistribution.sign_times(p)
        snr[name] = snr_for_rate(lambda x, d=dist: rate_at_fixed_distribution(d, const, float(undb(x))), 2.0)
    pen = snr["adapted"] - snr["target"]
    c("SNR penalty", _close(pen, 0.028, 0.01), f"{pen:.4f} dB, want 0.028 +- 0.01")


def criterion_5(c):
    res = dot_analysis(3, None, None)
    c("rate gain", _close(res.rate_gain, 0.076, 0.01), f"{res.rate_gain:.4f} bits, want 0.076 +- 0.01")
    c("SNR loss", _close(res.snr_loss_db, 0.67, 0.05), f"{res.snr_loss_db:.4f} dB, want 0.67 +- 0.05")


def _all_blocks(m):
    u = np.arange(2**m)
    return ((u[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)


def criterion_6(c):
    p_s, _ = kl_project_entropy(P_STAR / P_STAR.sum(), 1.75)
    specs = [(p_s, 10, 16), (np.array([0.75, 0.25]), 20, 16), (np.array([0.6, 0.3, 0.1]), 13, 16), (p_s, 8, 12)]
    bij = True
    for target, n, m in specs:
        spec = MatcherSpec(len(target), target, m, n)
        data = _all_blocks(m)
        z, f = match_blocks(spec, data)
        keys = {(bool(a),) + tuple(b) for b, a in zip(z, f)}
        bij &= len(keys) == 2**m and np.array_equal(dematch_blocks(spec, z, f), data)
    c("exhaustive bijectivity", bij, f"{len(specs)} specs, m_in <= 16")
    # the desk frame: 588 bits -> 336 symbols with the margin-adapted target
    target, _ = adapted_target(P_STAR, 336, 588)
    spec = MatcherSpec(4, target, 588, 336)
    data = np.random.default_rng(0).integers(0, 2, (10_000, 588), dtype=np.uint8)
    z, f = match_blocks(spec, data)
    c("round trip", np.array_equal(dematch_blocks(spec, z, f), data), f"10^4 blocks 588 -> 336, {int(f.sum())} escaped")
    emp = np.bincount(z.ravel(), minlength=4) / z.size
    tv = 0.5 * np.abs(emp - target).sum()
    c("output distribution", tv <= 0.01, f"TV {tv:.5f} over {z.size} symbols")
    # equality accounting escapes about half the blocks and must still invert
    eq = MatcherSpec(4, p_s, 588, 336)
    z, f = match_blocks(eq, data[:2000])
    c("round trip at equality", np.array_equal(dematch_blocks(eq, z, f), data[:2000]), f"{int(f.sum())}/2000 escaped")
    big = MatcherSpec(4, p_s, 37800, 21600)
    c("information conservation", _close(big.n_out * entropy(big.target), big.m_in, 1e-3),
      f"21600 H(P_S) = {21600 * entropy(p_s):.6f}")


# (target, n, offset in standard deviations): m = round(n H + offset sqrt(nu n))
OVERFLOW_SETTINGS = [
    ("P_S", 336, -1.0),
    ("P_S", 336, -2.0),
    ("P_S", 1000, 1.0),
    ((0.6, 0.3, 0.1), 200, -1.0),
    ((0.5, 0.3, 0.2), 500, 0.5),
    ((0.75, 0.25), 1000, -2.0),
]


def criterion_7(c, trials=20_000, seed=0):
    p_s, _ = kl_project_entropy(P_STAR / P_STAR.sum(), 1.75)
    covered = 0
    lines = []
    equality = MatcherSpec(4, p_s, 37800, 21600, strict=False)
    clt = overflow_prob_clt(OverflowModel.from_spec(equality))
    est = overflow_prob_mc(equality, trials, seed)
    eq_ok = clt == pytest.approx(0.5, abs=1e-6) and est.covers(clt)
    covered += est.covers(clt)
    lines.append(f"equality {clt:.4f} in [{est.low:.4f}, {est.high:.4f}]")
    for target, n, z in OVERFLOW_SETTINGS:
        t = p_s if target == "P_S" else np.array(target)
        m = round(n * entropy(t) + z * math.sqrt(information_variance(t) * n))
        spec = MatcherSpec(len(t), t, m, n, strict=False)
        clt = overflow_prob_clt(OverflowModel.from_spec(spec))
        est = overflow_prob_mc(spec, trials, seed)
        covered += est.covers(clt)
        lines.append(f"n={n} m={m} {clt:.4f} {'in' if est.covers(clt) else 'NOT in'} [{est.low:.4f}, {est.high:.4f}]")
    c("equality case", eq_ok, lines[0])
    c("settings covered", covered >= 5, f"{covered}/{len(lines)}: " + ", ".join(lines[1:]))


def _layouts():
    target, _ = adapted_target(P_STAR, 336, 588)
    return FrameLayout.shaped(bundled_code("peg1008_r34"), target), FrameLayout.uniform(bundled_code("peg1002_r23"))


CRIT8_SNR_DB = 14.8
CRIT8_FRAMES = 20_000
CRIT8_SEED = 8


def criterion_8(c, frames=CRIT8_FRAMES):
    shaped, uniform = _layouts()
    exact = True
    for kind in INTERLEAVERS:
        for layout in (shaped, uniform):
            il = make_interleaver(kind, layout.code.n, seed=1, code=layout.code)
            link = make_link(layout, ScaledConstellation(Constellation(3), 30.0), il)
            res = simulate_batch(link, 100, np.random.default_rng(2), decoder="hard")
            exact &= not res.iw_error.any()
    c("(a) noiseless chain", exact, "100 frames x 4 interleavers x 2 layouts")

    se = (shaped.spectral_efficiency, uniform.spectral_efficiency)
    ls = operating_point(shaped, CRIT8_SNR_DB)
    lu = operating_point(uniform, CRIT8_SNR_DB)
    rs = count_errors(ls, frames, seed=CRIT8_SEED, batch=500)
    ru = count_errors(lu, frames, seed=CRIT8_SEED, batch=500)
    # one-sided 97.5% bounds on each side: jointly 95% that shaped is below
    # and uniform above 1e-2 at the same SNR
    s_hi = rs.wilson(0.95)[1]
    u_lo = ru.wilson(0.95)[0]
    ok = se == (2.0, 2.0) and s_hi < 1e-2 < u_lo
    c("(b) shaped reaches 1e-2 first", ok,
      f"{CRIT8_SNR_DB} dB, SE {se}: shaped P_iw {rs.p_iw:.4f} (upper {s_hi:.4f}, {rs.overflows} escaped), "
      f"uniform P_iw {ru.p_iw:.4f} (lower {u_lo:.4f}), {frames} frames each")

    data = np.random.default_rng(3).integers(0, 2, (50, shaped.num_data), dtype=np.uint8)
    tx = transmit_frames(ls, data)
    level1 = tx.labels >> 2
    k1 = shaped.level1_data
    c("(c) parity on level 1", np.array_equal(level1[:, k1:], tx.codeword[:, shaped.code.k :]),
      f"{shaped.code.n - shaped.code.k} parity bits per frame")

    code = bundled_code("hamming74_full")
    fixed = 0
    for data in _all_blocks(4):
        word = encode_systematic(code, data)
        for pos in range(7):
            llr = 8.0 * (1 - 2.0 * word)  # strong LLRs
            llr[pos] = -llr[pos]
            res = decode_bp(code, llr, max_iters=20)
            fixed += bool(res.converged) and np.array_equal(res.codeword, word)
    c("(d) Hamming single errors", fixed == 112, f"{fixed}/112")


def criterion_9(c):
    rng = np.random.default_rng(9)

    def pmf(size):
        w = rng.random(size) * (rng.random(size) > 0.2)
        if w.sum() == 0:
            w[0] = 1.0
        return w / w.sum()

    worst = 0.0
    for _ in range(300):
        size = int(rng.integers(1, 17))
        p, q = pmf(size), pmf(size)
        worst = max(worst, abs(entropy(p) - oracles.entropy(p)))
        ref = oracles.kl(p, q)
        got = kl_divergence(p, q)
        if math.isinf(ref) != math.isinf(got):
            worst = math.inf
        elif not math.isinf(ref):
            worst = max(worst, abs(got - ref))
        r = int(rng.integers(1, 5))
        cols = int(rng.integers(1, 5))
        joint = pmf(r * cols).reshape(r, cols)
        worst = max(worst, abs(joint_mi(joint) - oracles.mutual_information(joint.tolist())))
    c("oracle agreement", worst <= 1e-10, f"max error {worst:.2e}")

    const = Constellation(3)
    pen_ok = order_ok = True
    for _ in range(200):
        dist = LabelDistribution(3, pmf(8))
        ch = discretize(ScaledConstellation(const, float(rng.uniform(0.05, 3.0))), 128)
        pen_ok &= dist.correlation_penalty() >= -1e-12
        order_ok &= ss_bmd_rate(dist, ch) <= mutual_information(dist, ch) + 1e-12
    c("penalty >= 0", pen_ok, "200 random P_B")
    c("ss_bmd <= cm", order_ok, "200 random (P_B, d)")

    grid = np.linspace(-5.0, 24.0, 30).round(6).tolist()
    rows = rate_sweep(3, None, grid, num_restarts=2)
    bad = [r["snr_db"] for r in rows
           if not r["bicm_uniform"] <= r["bicm_shaped"] + 1e-9 <= r["cm"] + 2e-9 <= r["shannon"] + 3e-9]
    c("curve ordering", not bad, f"{len(rows)} SNR points" + (f", violated at {bad}" if bad else ""))


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 10)}


def run(num):
    c = Check()
    t0 = time.time()
    CRITERIA[num](c)
    line = f"criterion {num}: {'PASS' if c.ok else 'FAIL'}  [{time.time() - t0:.1f} s] {c.summary()}"
    RESULTS[num] = line
    print(line, flush=True)
    return c


@pytest.mark.parametrize("num", range(1, 10))
def test_criterion(num):
    c = run(num)
    assert c.ok, RESULTS[num]


LONG_CODES = ("SSBMD_DVBS2_R34", "SSBMD_DVBS2_R23")


@pytest.mark.skipif(not all(k in os.environ for k in LONG_CODES),
                    reason="set SSBMD_DVBS2_R34 and SSBMD_DVBS2_R23 to rate-3/4 and rate-2/3 n=64800 alist files")
def test_long_frame_mode():
    # hour-scale: P_iw of both schemes around the 1e-2 crossing with n = 64800 codes
    from ssbmd.fec import read_alist

    r34, r23 = (read_alist(os.environ[k]) for k in LONG_CODES)
    n = r34.n // 3
    target, _ = adapted_target(P_STAR, n, 4 * n - r34.k)
    shaped = FrameLayout.shaped(r34, target)
    uniform = FrameLayout.uniform(r23)
    frames = int(os.environ.get("SSBMD_LONG_FRAMES", "1000"))
    for snr_db in np.arange(11.8, 13.41, 0.2):
        for name, layout in (("shaped", shaped), ("uniform", uniform)):
            res = count_errors(operating_point(layout, float(snr_db)), frames, seed=0, workers=os.cpu_count() or 1)
            print(f"{name:8s} {snr_db:.1f} dB  P_iw {res.p_iw:.4g}  ({res.iw_errors}/{res.frames})", flush=True)


if __name__ == "__main__":
    nums = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    failed = [n for n in nums if not run(n).ok]
    sys.exit(1 if failed else 0)
