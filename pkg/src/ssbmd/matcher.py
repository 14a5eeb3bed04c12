"""Fixed-to-fixed arithmetic distribution matcher.

Input bits are read as the binary expansion of a point x in [0, 1); the
matcher outputs the length-n symbol sequence whose arithmetic-coding
interval contains x. Intervals of all length-n sequences tile [0, 1), so
the map is well defined, and it is one-to-one whenever the interval of the
output holds no other input point. Blocks where that fails (a sequence more
probable than about 2^-m_in) are sent with an escape encoding instead and
marked by an overflow flag that travels next to the symbols.

Interval arithmetic: the width W of the current interval is kept as an
integer in [2^47, 2^48] in units of 2^-s, the target is quantized to integer
frequencies summing to 2^16, and the split point of symbol j is
floor(W * c_j / 2^16) with c_j the cumulative frequency. All products fit
in unsigned 64-bit integers, which lets many blocks run side by side.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import binomtest

from .infotheory import check_pmf, entropy

STATE_BITS = 48
FREQ_BITS = 16
FREQ_TOTAL = 1 << FREQ_BITS
DEFAULT_GAMMA = 3.0
# slack (bits per symbol) allowed when checking n H(target) >= m_in
CONSERVATION_SLACK = 1e-6


class DecodeError(ValueError):
    """Symbol block that no input block maps to."""


def quantize_pmf(pmf, total=FREQ_TOTAL):
    """Integer frequencies summing to ``total``; positive entries stay >= 1.

    Largest-remainder rounding after reserving one count per used symbol.
    """
    pmf = check_pmf(pmf, tol=1e-9)
    pos = pmf > 0
    if pos.sum() > total:
        raise ValueError("alphabet too large for the frequency resolution")
    freq = pos.astype(np.int64)
    spare = total - int(freq.sum())
    share = pmf / pmf.sum() * spare
    base = np.floor(share).astype(np.int64)
    freq += base
    left = total - int(freq.sum())
    order = np.argsort(-(share - base), kind="stable")
    freq[order[:left]] += 1
    return freq


def information_variance(pmf):
    """Var(-log2 P(Z)) for Z ~ pmf."""
    pmf = check_pmf(pmf, tol=1e-9)
    pos = pmf > 0
    info = -np.log2(pmf[pos])
    mu = float(pmf[pos] @ info)
    return float(max(pmf[pos] @ (info - mu) ** 2, 0.0))


@dataclass(frozen=True)
class MatcherSpec:
    """Maps ``m_in`` bits to ``n_out`` symbols from ``range(alphabet_size)``.

    With ``strict`` (the default) a MatcherSpec must satisfy n_out H(target) >=
    m_in; relaxed specs are allowed for small illustrations where most
    blocks take the escape path.
    """

    alphabet_size: int
    target: np.ndarray
    m_in: int
    n_out: int
    strict: bool = True

    def __post_init__(self):
        target = check_pmf(self.target, tol=1e-9).copy()
        target = target / target.sum()
        if target.size != self.alphabet_size:
            raise ValueError("target size does not match the alphabet")
        if self.alphabet_size < 2:
            raise ValueError("need at least two symbols")
        if self.m_in < 0 or self.n_out < 1:
            raise ValueError("block lengths must be positive")
        if self.alphabet_size ** self.n_out < 2**self.m_in:
            raise ValueError("escape encoding cannot hold the input block")
        if self.strict and self.m_in > self.n_out * (entropy(target) + CONSERVATION_SLACK):
            raise ValueError(
                f"{self.m_in} input bits exceed the information of {self.n_out} symbols "
                f"({self.n_out * entropy(target):.3f} bits)"
            )
        target.setflags(write=False)
        object.__setattr__(self, "target", target)
        freq = quantize_pmf(target)
        cum = np.concatenate([[0], np.cumsum(freq)]).astype(np.uint64)
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def with_margin(cls, target, n_out, gamma=DEFAULT_GAMMA):
        """Input length floor(n H) - ceil(gamma sqrt(nu n)), so the
        overflow probability is about Phi(-gamma)."""
        target = np.asarray(target, dtype=float)
        target = target / target.sum()
        margin = math.ceil(gamma * math.sqrt(information_variance(target) * n_out))
        m_in = max(math.floor(n_out * entropy(target) + 1e-9) - margin, 0)
        return cls(target.size, target, m_in, n_out)

    @property
    def information_margin(self):
        """n_out H(target) - m_in in bits."""
        return self.n_out * entropy(self.target) - self.m_in

    @property
    def symbol_bits(self):
        return max(1, math.ceil(math.log2(self.alphabet_size)))

    @property
    def frequencies(self):
        return np.diff(self._cum.astype(np.int64))


def _bit_length(w):
    return np.frexp(w.astype(np.float64))[1].astype(np.int64)


def match_blocks(spec, data_bits):
    """Match a (num_blocks, m_in) bit array; returns (symbols, overflow flags)."""
    bits = np.asarray(data_bits)
    if bits.ndim != 2 or bits.shape[1] != spec.m_in:
        raise ValueError(f"expected blocks of {spec.m_in} bits, got shape {bits.shape}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("data must be bits")
    bits = bits.astype(np.uint64)
    num, m = bits.shape
    rows = np.arange(num)
    cum = spec._cum[:-1]

    def read(pos):
        """Bit at expansion position ``pos`` (0-based) of every block; zero past m."""
        inside = pos < m
        out = np.zeros(num, dtype=np.uint64)
        out[inside] = bits[rows[inside], pos[inside]]
        return out

    # x * 2^s - A, with A the (implicit) interval start
    s = np.full(num, STATE_BITS, dtype=np.int64)
    offset = np.zeros(num, dtype=np.uint64)
    for r in range(STATE_BITS):
        offset = (offset << np.uint64(1)) | read(np.full(num, r))
    width = np.full(num, 1 << STATE_BITS, dtype=np.uint64)
    symbols = np.empty((num, spec.n_out), dtype=np.int64)
    shift16 = np.uint64(FREQ_BITS)
    for t in range(spec.n_out):
        starts = (width[:, None] * cum[None, :]) >> shift16
        j = (starts <= offset[:, None]).sum(axis=1) - 1
        lo = starts[rows, j]
        hi = np.where(j + 1 < spec.alphabet_size, starts[rows, np.minimum(j + 1, spec.alphabet_size - 1)], width)
        symbols[:, t] = j
        offset = offset - lo
        width = hi - lo
        k = STATE_BITS - _bit_length(width)
        width = width << k.astype(np.uint64)
        for r in range(int(k.max(initial=0))):
            act = r < k
            nxt = read(s + r)
            offset = np.where(act, (offset << np.uint64(1)) | nxt, offset)
        s += k
    overflow = _overflowed(s - m, offset, width)
    if overflow.any():
        for b in np.flatnonzero(overflow):
            symbols[b] = escape_encode(spec, bits[b].astype(np.uint8))
    return symbols, overflow


def _overflowed(excess, offset, width):
    """Whether the final interval holds a neighbouring input point as well."""
    out = excess < 0
    ok = (excess >= 0) & (excess < STATE_BITS)
    if ok.any():
        g = np.uint64(1) << excess[ok].astype(np.uint64)
        out[ok] = (offset[ok] >= g) | (offset[ok] + g < width[ok])
    return out


def match(spec, data_bits):
    """Match one block of ``m_in`` bits; returns (symbols, overflow flag)."""
    bits = np.asarray(data_bits)
    if bits.ndim != 1:
        raise ValueError("expected a bit vector")
    symbols, overflow = match_blocks(spec, bits[None, :])
    return symbols[0], bool(overflow[0])


def _to_int(bits):
    return int("".join("1" if b else "0" for b in bits), 2) if len(bits) else 0


def _to_bits(u, m):
    if m == 0:
        return np.zeros(0, dtype=np.uint8)
    return np.array([int(c) for c in format(u, f"0{m}b")], dtype=np.uint8)


def escape_encode(spec, data_bits):
    """Input block read as a base-|alphabet| number with n_out digits."""
    u = _to_int(np.asarray(data_bits))
    k = spec.alphabet_size
    digits = np.empty(spec.n_out, dtype=np.int64)
    for t in range(spec.n_out - 1, -1, -1):
        u, digits[t] = divmod(u, k)
    return digits


def escape_decode(spec, symbols):
    u = 0
    for z in symbols:
        u = u * spec.alphabet_size + int(z)
    if u >> spec.m_in:
        raise DecodeError("escape block out of range")
    return _to_bits(u, spec.m_in)


def dematch(spec, symbols, overflow=False):
    """Inverse of ``match``; raises DecodeError for sequences outside its image."""
    symbols = np.asarray(symbols)
    if symbols.shape != (spec.n_out,):
        raise ValueError(f"expected {spec.n_out} symbols, got shape {symbols.shape}")
    if np.any((symbols < 0) | (symbols >= spec.alphabet_size)):
        raise DecodeError("symbol outside the alphabet")
    if overflow:
        return escape_decode(spec, symbols)
    cum = [int(c) for c in spec._cum]
    start, width, s = 0, 1 << STATE_BITS, STATE_BITS
    for z in symbols:
        z = int(z)
        lo = (width * cum[z]) >> FREQ_BITS
        hi = (width * cum[z + 1]) >> FREQ_BITS if z + 1 < spec.alphabet_size else width
        if hi <= lo:
            raise DecodeError("symbol has zero probability")
        start += lo
        width = hi - lo
        k = STATE_BITS - width.bit_length()
        start <<= k
        width <<= k
        s += k
    excess = s - spec.m_in
    if excess < 0:
        raise DecodeError("sequence interval holds several input blocks")
    u = -((-start) >> excess)  # first input point at or after the interval start
    if (u << excess) >= start + width or ((u + 1) << excess) < start + width or (u >> spec.m_in):
        raise DecodeError("sequence interval does not hold exactly one input block")
    return _to_bits(u, spec.m_in)


def dematch_blocks(spec, symbols, overflow):
    symbols = np.asarray(symbols)
    return np.stack([dematch(spec, z, f) for z, f in zip(symbols, overflow)])


# ---------------------------------------------------------------------------
# block framing


def pack_block(spec, symbols, overflow):
    """Flag byte (0 or 1) followed by the symbols, ``symbol_bits`` each,
    most significant bit first, zero-padded to a whole byte."""
    b = spec.symbol_bits
    symbols = np.asarray(symbols, dtype=np.int64)
    bits = ((symbols[:, None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.uint8).ravel()
    return bytes([1 if overflow else 0]) + np.packbits(bits).tobytes()


def unpack_block(spec, blob):
    if len(blob) < 1 or blob[0] not in (0, 1):
        raise DecodeError("bad flag byte")
    b = spec.symbol_bits
    need = math.ceil(spec.n_out * b / 8)
    if len(blob) != 1 + need:
        raise DecodeError(f"expected {1 + need} bytes, got {len(blob)}")
    bits = np.unpackbits(np.frombuffer(blob[1:], dtype=np.uint8))[: spec.n_out * b]
    symbols = bits.reshape(spec.n_out, b) @ (1 << np.arange(b - 1, -1, -1))
    return symbols.astype(np.int64), bool(blob[0])


# ---------------------------------------------------------------------------
# overflow probability


@dataclass(frozen=True)
class OverflowModel:
    """Information content A = -log2 P(Z): mean ``mu`` and variance ``nu``."""

    mu: float
    nu: float
    m_in: int
    n_out: int

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("variance must be non-negative")

    @classmethod
    def from_spec(cls, spec):
        return cls(entropy(spec.target), information_variance(spec.target), spec.m_in, spec.n_out)

    @classmethod
    def from_target(cls, target, m_in, n_out):
        target = np.asarray(target, dtype=float)
        return cls(entropy(target), information_variance(target), m_in, n_out)


def overflow_prob_clt(model):
    """Phi((m - n mu) / sqrt(nu n)); a step at m = n mu when nu is zero."""
    shift = model.m_in - model.n_out * model.mu
    if model.nu == 0:
        return 1.0 if shift > 0 else 0.0
    return float(ndtr(shift / math.sqrt(model.nu * model.n_out)))


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    low: float
    high: float
    hits: int
    trials: int

    def covers(self, p):
        return self.low <= p <= self.high


def overflow_prob_mc(spec, num_trials, seed=0):
    """Fraction of iid target blocks with information content below m_in.

    Only symbol counts matter, so blocks are drawn as multinomial counts.
    The interval is the Wilson score interval at 95%.
    """
    if num_trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    target = np.asarray(spec.target, dtype=float)
    info = np.zeros_like(target)
    pos = target > 0
    info[pos] = -np.log2(target[pos])
    counts = rng.multinomial(spec.n_out, target, size=num_trials)
    hits = int(np.count_nonzero(counts @ info < spec.m_in))
    ci = binomtest(hits, num_trials).proportion_ci(confidence_level=0.95, method="wilson")
    return McEstimate(hits / num_trials, float(ci.low), float(ci.high), hits, num_trials)
