"""Coded transmission over 8-ASK: frame layout, interleavers, soft demapping
and end-to-end Monte Carlo simulation.

A shaped frame of n channel uses carries one codeword of n_code = 3n bits
from a rate-3/4 code. Matched symbols S = (B2, B3) fill bit levels 2 and 3,
bit level 1 carries uniform data followed by all parity bits. A uniform
frame sends a rate-2/3 codeword with equiprobable labels.
"""

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .channel import OutputQuantizer, channel_from_edges, quantize
from .constellation import Constellation, ScaledConstellation, second_moment
from .fec import LLR_CLIP, decode_bp, encode_systematic
from .infotheory import LabelDistribution, entropy
from .matcher import DecodeError, MatcherSpec, dematch, information_variance, match_blocks
from .optimize import kl_project_entropy

SUB_ALPHABET = 4  # S = (B2, B3), indexed 2 b2 + b3


class LayoutError(ValueError):
    pass


class StageError(RuntimeError):
    """Failure inside one stage of the transmit/receive chain."""

    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


def layout_accounting(n_code, code_rate_num=3, code_rate_den=4, m=3):
    """Bit budget of a shaped frame: data bits on level 1, parity bits,
    matcher input and output lengths, total data bits."""
    if n_code % m or (n_code * code_rate_num) % code_rate_den:
        raise LayoutError("codeword length does not split into levels")
    n = n_code // m
    k_code = n_code * code_rate_num // code_rate_den
    parity = n_code - k_code
    level1_data = n - parity
    k = 2 * n_code // 3
    m_in = k - level1_data
    if level1_data < 0:
        raise LayoutError("parity does not fit on bit level 1")
    return {"n": n, "k_code": k_code, "parity": parity, "level1_data": level1_data, "m_in": m_in, "k": k}


def adapted_target(target, n_out, m_in, gamma=3.0, step=1e-4):
    """Entropy-projected target whose matcher keeps an overflow margin.

    Returns the projection of ``target`` with the smallest entropy h on a
    grid of ``step`` such that n_out h - ceil(gamma sqrt(nu n_out)) >= m_in,
    and the corresponding entropy.
    """
    target = np.asarray(target, dtype=float)
    target = target / target.sum()
    h = max(entropy(target), m_in / n_out)
    h_max = math.log2(np.count_nonzero(target))
    while h <= h_max + 1e-12:
        pmf, _ = kl_project_entropy(target, min(h, h_max))
        margin = math.ceil(gamma * math.sqrt(information_variance(pmf) * n_out))
        if n_out * entropy(pmf) - margin >= m_in - 1e-9:
            return pmf, entropy(pmf)
        h += step
    raise LayoutError("no projected target leaves the requested margin")


@dataclass(frozen=True)
class FrameLayout:
    """One codeword per frame over n channel uses of 2^m-ASK."""

    n: int
    m: int
    code: object
    matcher: MatcherSpec = None

    def __post_init__(self):
        if self.m != 3:
            raise LayoutError("the frame layout is defined for three bit levels")
        if self.code.n != self.m * self.n:
            raise LayoutError(f"codeword length {self.code.n} != {self.m} x {self.n}")
        if self.code.k / self.code.n < (self.m - 1) / self.m - 1e-12:
            raise LayoutError("code rate below (m-1)/m cannot hold the shaped levels")
        if self.matcher is not None:
            if self.matcher.n_out != self.n or self.matcher.alphabet_size != SUB_ALPHABET:
                raise LayoutError("matcher must emit one 4-ary symbol per channel use")

    @classmethod
    def shaped(cls, code, target, m_in=None):
        """Rate-(m-1)/m or higher code; ``target`` is P_S over 2 b2 + b3."""
        n = code.n // 3
        if m_in is None:
            m_in = 4 * n - code.k
        spec = MatcherSpec(SUB_ALPHABET, np.asarray(target, dtype=float), m_in, n)
        return cls(n, 3, code, spec)

    @classmethod
    def uniform(cls, code):
        return cls(code.n // 3, 3, code, None)

    @property
    def is_shaped(self):
        return self.matcher is not None

    @property
    def level1_data(self):
        return self.code.k - 2 * self.n if self.is_shaped else 0

    @property
    def num_data(self):
        return self.level1_data + self.matcher.m_in if self.is_shaped else self.code.k

    @property
    def spectral_efficiency(self):
        return self.num_data / self.n

    def label_distribution(self):
        if not self.is_shaped:
            return LabelDistribution.uniform(self.m)
        return LabelDistribution.sign_times(self.matcher.target)


# ---------------------------------------------------------------------------
# interleavers


INTERLEAVERS = ("parity_bit", "consecutive_bit", "random", "bit_reliability")


@dataclass(frozen=True)
class InterleaverSpec:
    """``positions[l, t]``: codeword index sent on bit level l+1 of symbol t."""

    kind: str
    n_code: int
    m: int
    seed: int
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions)
        if pos.shape != (self.m, self.n_code // self.m) or not np.array_equal(np.sort(pos.ravel()), np.arange(self.n_code)):
            raise LayoutError("interleaver is not a permutation of the codeword")
        pos.setflags(write=False)

    def interleave(self, codewords):
        """(..., n_code) -> (..., m, n) per-level bits."""
        return np.asarray(codewords)[..., self.positions]

    def deinterleave(self, levels):
        levels = np.asarray(levels)
        out = np.empty(levels.shape[:-2] + (self.n_code,), dtype=levels.dtype)
        out[..., self.positions] = levels
        return out


def make_interleaver(kind, n_code, m=3, seed=0, code=None):
    """Interleaver of the given kind; ``bit_reliability`` needs the code."""
    if n_code % m:
        raise LayoutError(f"codeword length {n_code} not divisible by {m}")
    n = n_code // m
    idx = np.arange(n_code)
    if kind == "parity_bit":
        # level 1 <- last block, level m <- first block
        pos = idx.reshape(m, n)[::-1]
    elif kind == "consecutive_bit":
        pos = idx.reshape(n, m).T
    elif kind == "random":
        pos = np.random.default_rng(seed).permutation(n_code).reshape(m, n)
    elif kind == "bit_reliability":
        if code is None:
            raise LayoutError("the bit-reliability interleaver needs the code's column degrees")
        order = np.argsort(-code.column_degrees, kind="stable")
        pos = order.reshape(m, n)
    else:
        raise LayoutError(f"unknown interleaver {kind!r}; choose from {INTERLEAVERS}")
    return InterleaverSpec(kind, n_code, m, seed, np.ascontiguousarray(pos))


def pb_interleave(codeword, m=3):
    """Parity-bit interleaver as a tuple of level vectors (B1, ..., Bm)."""
    codeword = np.asarray(codeword)
    levels = make_interleaver("parity_bit", codeword.shape[-1], m).interleave(codeword)
    return tuple(levels[..., l, :] for l in range(m))


def data_preinterleave(data_level1, matched_levels):
    """Systematic encoder input [B3 | B2 | level-1 data].

    ``matched_levels`` holds the B2 bits in its first row and the B3 bits
    in its second (leading batch axes allowed).
    """
    matched = np.asarray(matched_levels)
    data_level1 = np.asarray(data_level1)
    if matched.shape[-2] != 2 or matched.shape[:-2] != data_level1.shape[:-1]:
        raise LayoutError("matched levels must be a pair of equal-length bit rows")
    return np.concatenate([matched[..., 1, :], matched[..., 0, :], data_level1], axis=-1)


# ---------------------------------------------------------------------------
# demapping


@dataclass(frozen=True)
class DemapTable:
    """Per-level channel LLRs for every quantizer bin and a-priori LLRs."""

    channel: np.ndarray  # (m, num_bins)
    prior: np.ndarray  # (m,)
    empty: np.ndarray  # bins with zero probability under both hypotheses, per level

    @property
    def total(self):
        return self.channel + self.prior[:, None]


def _ln_ratio(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a) - np.log(b)
    out = np.where((a == 0) & (b == 0), 0.0, out)
    return np.clip(out, -LLR_CLIP, LLR_CLIP)


def demap_table(dist, ch):
    """L_i(q) = ln P(q | B_i=0) / P(q | B_i=1) and pi_i = ln P_Bi(0) / P_Bi(1)."""
    joint = ch.joint(dist)
    bits = dist.bits
    m = dist.m
    chan = np.empty((m, joint.shape[1]))
    prior = np.empty(m)
    empty = np.zeros((m, joint.shape[1]), dtype=bool)
    for i in range(m):
        p0, p1 = dist.marginal(i + 1)
        q0 = joint[bits[:, i] == 0].sum(axis=0) / p0 if p0 > 0 else np.zeros(joint.shape[1])
        q1 = joint[bits[:, i] == 1].sum(axis=0) / p1 if p1 > 0 else np.zeros(joint.shape[1])
        chan[i] = _ln_ratio(q0, q1)
        empty[i] = (q0 == 0) & (q1 == 0)
        prior[i] = _ln_ratio(np.array(p0), np.array(p1))
    return DemapTable(chan, prior, empty)


def demap_llrs(q, dist, ch):
    """(L_1, ..., L_m, pi_1, ..., pi_m) for one quantizer bin ``q``."""
    table = demap_table(dist, ch)
    if table.empty[:, q].any():
        warnings.warn(f"bin {q} has zero probability; its channel LLR is set to 0", RuntimeWarning, stacklevel=2)
    return tuple(table.channel[:, q]) + tuple(table.prior)


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class Link:
    """Everything fixed across frames at one operating point."""

    layout: FrameLayout
    scaled: ScaledConstellation
    interleaver: InterleaverSpec
    quantizer: OutputQuantizer
    table: DemapTable


def make_link(layout, scaled, interleaver, quantizer=None):
    if interleaver.n_code != layout.code.n:
        raise LayoutError("interleaver length does not match the code")
    if quantizer is None:
        quantizer = OutputQuantizer.for_constellation(scaled)
    ch = channel_from_edges(scaled, quantizer.bin_edges)
    table = demap_table(layout.label_distribution(), ch)
    return Link(layout, scaled, interleaver, quantizer, table)


def scaling_for_snr(snr_db, dist, constellation=None):
    """d that puts the average power of ``dist`` at the given SNR."""
    constellation = constellation or Constellation(dist.m)
    return math.sqrt(10 ** (snr_db / 10) / second_moment(dist, constellation))


@dataclass
class Transmission:
    data: np.ndarray
    codeword: np.ndarray
    labels: np.ndarray
    overflow: np.ndarray


def transmit_frames(link, data):
    """Data bits (frames, num_data) -> labels (frames, n) plus bookkeeping."""
    lay = link.layout
    data = np.asarray(data, dtype=np.uint8)
    try:
        if lay.is_shaped:
            k1 = lay.level1_data
            symbols, overflow = match_blocks(lay.matcher, data[:, k1:])
            matched = np.stack([symbols >> 1, symbols & 1], axis=1).astype(np.uint8)
            enc_in = data_preinterleave(data[:, :k1], matched)
        else:
            overflow = np.zeros(data.shape[0], dtype=bool)
            enc_in = data
    except ValueError as exc:
        raise StageError("match", exc) from exc
    try:
        cw = encode_systematic(lay.code, enc_in)
    except ValueError as exc:
        raise StageError("encode", exc) from exc
    levels = link.interleaver.interleave(cw)  # (frames, m, n)
    weights = 1 << np.arange(lay.m - 1, -1, -1)
    labels = np.einsum("fln,l->fn", levels.astype(np.int64), weights)
    return Transmission(data, cw, labels, overflow)


def receive_frames(link, q, overflow, decoder="bp", max_iters=50):
    """Quantized outputs -> (recovered data, decoder converged, dematch failed).

    ``decoder='hard'`` skips belief propagation and takes the signs of the
    channel LLRs, which is only meant for noiseless checks of the chain.
    """
    lay = link.layout
    llr_levels = link.table.total[np.arange(lay.m)[None, :, None], q[:, None, :]]
    llr = link.interleaver.deinterleave(llr_levels)
    if decoder == "bp":
        res = decode_bp(lay.code, llr, max_iters=max_iters)
        cw_hat, ok = res.codeword, res.converged
    elif decoder == "hard":
        cw_hat = (llr < 0).astype(np.uint8)
        ok = np.ones(len(cw_hat), dtype=bool)
    else:
        raise ValueError("decoder must be 'bp' or 'hard'")
    u = cw_hat[:, : lay.code.k]
    bad = np.zeros(len(u), dtype=bool)
    if not lay.is_shaped:
        return u.copy(), ok, bad
    n, k1 = lay.n, lay.level1_data
    b3, b2, d1 = u[:, :n], u[:, n : 2 * n], u[:, 2 * n :]
    symbols = 2 * b2.astype(np.int64) + b3
    out = np.zeros((len(u), lay.num_data), dtype=np.uint8)
    out[:, :k1] = d1
    for f in range(len(u)):
        try:
            out[f, k1:] = dematch(lay.matcher, symbols[f], bool(overflow[f]))
        except DecodeError:
            bad[f] = True
    return out, ok, bad


@dataclass
class FrameResult:
    data: np.ndarray
    recovered: np.ndarray
    iw_error: np.ndarray
    overflow: np.ndarray


def simulate_batch(link, num_frames, rng, decoder="bp", max_iters=50, overflow_is_error=False):
    lay = link.layout
    data = rng.integers(0, 2, size=(num_frames, lay.num_data), dtype=np.uint8)
    tx = transmit_frames(link, data)
    y = link.scaled.amplitudes[tx.labels] + rng.standard_normal(tx.labels.shape)
    q = quantize(link.quantizer, y)
    rec, _, bad = receive_frames(link, q, tx.overflow, decoder=decoder, max_iters=max_iters)
    err = np.any(rec != data, axis=1) | bad
    if overflow_is_error:
        err |= tx.overflow
    return FrameResult(data, rec, err, tx.overflow)


def simulate_frame(layout, scaled, interleaver, seed, decoder="bp"):
    """One frame: (transmitted data, recovered data, information-word error)."""
    link = make_link(layout, scaled, interleaver)
    res = simulate_batch(link, 1, np.random.default_rng(seed), decoder=decoder)
    return res.data[0], res.recovered[0], bool(res.iw_error[0])


@dataclass(frozen=True)
class ErrorCount:
    snr_db: float
    frames: int
    iw_errors: int
    overflows: int = 0

    @property
    def p_iw(self):
        return self.iw_errors / self.frames if self.frames else float("nan")

    def wilson(self, confidence=0.95):
        ci = binomtest(self.iw_errors, self.frames).proportion_ci(confidence_level=confidence, method="wilson")
        return float(ci.low), float(ci.high)


def _worker(args):
    link, seed, worker, frames, batch, decoder, max_iters, target_errors, overflow_is_error = args
    rng = np.random.default_rng([seed, worker])
    done = errors = overflows = 0
    while done < frames and (target_errors is None or errors < target_errors):
        b = min(batch, frames - done)
        res = simulate_batch(link, b, rng, decoder, max_iters, overflow_is_error)
        done += b
        errors += int(res.iw_error.sum())
        overflows += int(res.overflow.sum())
    return done, errors, overflows


def count_errors(link, num_frames, seed=0, workers=1, batch=200, decoder="bp", max_iters=50,
                 target_errors=None, overflow_is_error=False):
    """Monte Carlo information-word errors at one operating point.

    Frame i belongs to worker i mod ``workers``; worker w draws from the
    generator seeded with (seed, w), so results depend only on the seed and
    the worker count. With ``target_errors`` each worker stops early once it
    has seen its share of errors.
    """
    share = [num_frames // workers + (w < num_frames % workers) for w in range(workers)]
    per_worker = None if target_errors is None else max(1, math.ceil(target_errors / workers))
    jobs = [(link, seed, w, share[w], batch, decoder, max_iters, per_worker, overflow_is_error) for w in range(workers)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_worker, jobs))
    else:
        out = [_worker(j) for j in jobs]
    snr = 10 * math.log10(second_moment(link.layout.label_distribution(), link.scaled.base) * link.scaled.d**2)
    return ErrorCount(snr, sum(o[0] for o in out), sum(o[1] for o in out), sum(o[2] for o in out))


def operating_point(layout, snr_db, interleaver="parity_bit", seed=0):
    """Link at the SNR set by the layout's label distribution."""
    d = scaling_for_snr(snr_db, layout.label_distribution())
    const = Constellation(layout.m)
    il = make_interleaver(interleaver, layout.code.n, layout.m, seed=seed, code=layout.code)
    return make_link(layout, ScaledConstellation(const, d), il)
