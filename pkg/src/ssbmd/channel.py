"""AWGN channel: discretized transition matrices, sampling and quantization.

The noise has unit variance throughout; the SNR is set by the constellation
scaling alone.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .constellation import ScaledConstellation, _pmf_of

RATE_SPAN_SIGMAS = 4.0
QUANTIZER_SPAN_SIGMAS = 4.0
QUANTIZER_BITS = 5


class DegenerateChannelWarning(UserWarning):
    """Raised when the constellation is scaled to a single point."""


def uniform_edges(half_width, num_bins):
    """Bin edges splitting [-half_width, half_width] into ``num_bins`` equal
    intervals, with the two outermost intervals stretched to +-inf."""
    if num_bins < 2:
        raise ValueError("need at least two bins")
    if not half_width > 0:
        raise ValueError("half width must be positive")
    edges = np.linspace(-half_width, half_width, num_bins + 1)
    edges[0], edges[-1] = -np.inf, np.inf
    return edges


def interval_probs(edges, means):
    """P(e_q <= mean + Z < e_{q+1}) for Z ~ N(0, 1); shape (len(means), len(edges)-1).

    Intervals on the upper side use survival functions so that tail bins keep
    full relative precision.
    """
    means = np.asarray(means, dtype=float)
    lo = edges[None, :-1] - means[:, None]
    hi = edges[None, 1:] - means[:, None]
    upper = lo > 0
    with np.errstate(invalid="ignore"):
        by_cdf = ndtr(hi) - ndtr(lo)
        by_sf = ndtr(-lo) - ndtr(-hi)
    return np.where(upper, by_sf, by_cdf)


@dataclass(frozen=True)
class DiscretizedChannel:
    """Transition probabilities P(q | b) from labels b to output bins q."""

    scaled: ScaledConstellation
    bin_edges: np.ndarray
    transition: np.ndarray
    degenerate: bool = False

    @property
    def num_bins(self):
        return len(self.bin_edges) - 1

    @property
    def m(self):
        return self.scaled.m

    @property
    def d(self):
        return self.scaled.d

    def joint(self, dist):
        """P(b, q) as a (2^m, num_bins) array."""
        pmf = _pmf_of(dist)
        if pmf.shape != (self.transition.shape[0],):
            raise ValueError("distribution size does not match channel input alphabet")
        return pmf[:, None] * self.transition

    def output_pmf(self, dist):
        return _pmf_of(dist) @ self.transition

    def quantizer(self):
        return OutputQuantizer(self.bin_edges)


def channel_from_edges(scaled, edges):
    edges = np.asarray(edges, dtype=float)
    if edges[0] != -np.inf or edges[-1] != np.inf or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing from -inf to +inf")
    trans = interval_probs(edges, scaled.amplitudes)
    trans.setflags(write=False)
    edges.setflags(write=False)
    degenerate = scaled.d == 0 or scaled.base.size == 1
    if degenerate:
        warnings.warn("constellation scaled to zero: output is independent of the input",
                      DegenerateChannelWarning, stacklevel=3)
    return DiscretizedChannel(scaled, edges, trans, degenerate)


def discretize(scaled, num_bins=512, span_sigmas=RATE_SPAN_SIGMAS):
    """Quantize Y = d x_B + Z into ``num_bins`` bins.

    The finite part of the output range is ``+-(d * x_max + span_sigmas)``,
    split into equal-width bins whose outermost two extend to infinity.
    A scaling of zero is accepted but warns (all rows are identical).
    """
    if num_bins < 2:
        raise ValueError("num_bins must be at least 2")
    if not span_sigmas > 0:
        raise ValueError("span_sigmas must be positive")
    x_max = float(np.max(np.abs(scaled.base.points)))
    edges = uniform_edges(scaled.d * x_max + span_sigmas, num_bins)
    return channel_from_edges(scaled, edges)


def bit_marginal_channel(ch, dist, i):
    """Joint P(B_i = a, Q = q) as a (2, num_bins) array; ``i`` counts from 1."""
    m = ch.m
    if not 1 <= i <= m:
        raise ValueError(f"bit index must be in 1..{m}")
    joint = ch.joint(dist)
    bit = (np.arange(2**m) >> (m - i)) & 1
    return np.stack([joint[bit == 0].sum(axis=0), joint[bit == 1].sum(axis=0)])


def transmit(scaled, label, noise_sample):
    """Channel output d * x_label + noise for one or many labels."""
    label = np.asarray(label)
    if np.any((label < 0) | (label >= scaled.base.size)):
        raise ValueError("label outside the constellation")
    return scaled.amplitudes[label] + noise_sample


def awgn(scaled, labels, rng):
    """Pass labels through the channel with fresh unit-variance noise from ``rng``."""
    labels = np.asarray(labels)
    return transmit(scaled, labels, rng.standard_normal(labels.shape))


@dataclass(frozen=True)
class OutputQuantizer:
    """Scalar quantizer with bins [e_q, e_{q+1}); edges run from -inf to +inf."""

    bin_edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        if len(edges) < 3 or edges[0] != -np.inf or edges[-1] != np.inf:
            raise ValueError("quantizer edges must start at -inf and end at +inf")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("quantizer edges must be strictly increasing")
        object.__setattr__(self, "bin_edges", edges)

    @property
    def num_levels(self):
        return len(self.bin_edges) - 1

    @classmethod
    def for_constellation(cls, scaled, bits=QUANTIZER_BITS, span_sigmas=QUANTIZER_SPAN_SIGMAS):
        x_max = float(np.max(np.abs(scaled.base.points)))
        return cls(uniform_edges(scaled.d * x_max + span_sigmas, 2**bits))

    def __call__(self, y):
        return quantize(self, y)


def quantize(q, y):
    """Index of the bin containing ``y``; values on an edge go to the right bin."""
    idx = np.searchsorted(q.bin_edges[1:-1], y, side="right")
    return int(idx) if np.ndim(idx) == 0 else idx
