"""2^m-ASK constellations with binary labelings.

Labels are handled as integers whose most significant bit is B1, so label
``b`` of an m-bit constellation has bits ``(b >> (m-1)) & 1, ..., b & 1``.
"""

from dataclasses import dataclass, field

import numpy as np

MAX_BITS = 8


def _check_m(m):
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or not 1 <= m <= MAX_BITS:
        raise ValueError(f"bits per symbol must be an integer in [1, {MAX_BITS}], got {m!r}")
    return int(m)


def ask_points(m):
    """Return the 2^m ASK amplitudes ``2i - 2^m - 1``, i = 1..2^m, ascending."""
    m = _check_m(m)
    i = np.arange(1, 2**m + 1)
    return 2 * i - 2**m - 1


def gray_sequence(m):
    """Binary reflected Gray code built by reflect-and-prefix."""
    m = _check_m(m)
    seq = [0, 1]
    for level in range(1, m):
        seq = seq + [(1 << level) | c for c in reversed(seq)]
    return np.array(seq, dtype=np.int64)


def brgc_labeling(m):
    """Label of each point in ascending amplitude order.

    ``brgc_labeling(3)`` gives ``[0b000, 0b001, 0b011, 0b010, 0b110, 0b111,
    0b101, 0b100]``; bit B1 (the MSB) is 0 on the negative half.
    """
    return gray_sequence(m)


def label_bits(m):
    """(2^m, m) array whose row ``b`` holds (B1, ..., Bm) of label ``b``."""
    m = _check_m(m)
    labels = np.arange(2**m)
    shifts = np.arange(m - 1, -1, -1)
    return ((labels[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def format_label(label, m):
    return format(int(label), f"0{m}b")


@dataclass(frozen=True)
class Constellation:
    """ASK points plus a labeling.

    ``labeling[j]`` is the label of the j-th point in ascending order. The
    convenience array ``amplitudes`` is indexed by label instead.
    """

    m: int
    labeling: np.ndarray = None
    points: np.ndarray = field(init=False, repr=False)
    point_of_label: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = _check_m(self.m)
        labeling = brgc_labeling(m) if self.labeling is None else np.asarray(self.labeling, dtype=np.int64)
        if labeling.shape != (2**m,) or not np.array_equal(np.sort(labeling), np.arange(2**m)):
            raise ValueError("labeling must be a permutation of 0..2^m-1")
        point_of_label = np.empty(2**m, dtype=np.int64)
        point_of_label[labeling] = np.arange(2**m)
        labeling = labeling.copy()
        labeling.setflags(write=False)
        point_of_label.setflags(write=False)
        points = ask_points(m)
        points.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "labeling", labeling)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "point_of_label", point_of_label)

    @property
    def size(self):
        return 2**self.m

    @property
    def amplitudes(self):
        """Integer amplitude of every label, indexed by label."""
        return self.points[self.point_of_label]

    @property
    def bits(self):
        return label_bits(self.m)

    def is_gray(self):
        diff = self.labeling[1:] ^ self.labeling[:-1]
        return bool(np.all((diff & (diff - 1)) == 0) and np.all(diff != 0))

    def relabeled(self, perm):
        """Constellation whose label ``perm[b]`` sits where label ``b`` was."""
        perm = np.asarray(perm, dtype=np.int64)
        return Constellation(self.m, perm[self.labeling])

    def describe(self):
        rows = [f"{int(x):+d}  {format_label(b, self.m)}" for x, b in zip(self.points, self.labeling)]
        return "\n".join(rows)


@dataclass(frozen=True)
class ScaledConstellation:
    """Constellation scaled by ``d``; the channel input for label b is d * x_b."""

    base: Constellation
    d: float

    def __post_init__(self):
        if not np.isfinite(self.d) or self.d < 0:
            raise ValueError(f"scaling must be a finite non-negative real, got {self.d}")

    @property
    def m(self):
        return self.base.m

    @property
    def amplitudes(self):
        return self.d * self.base.amplitudes.astype(float)

    def signal(self, labels):
        return self.amplitudes[np.asarray(labels)]


def _pmf_of(dist):
    return np.asarray(getattr(dist, "pmf", dist), dtype=float)


def second_moment(dist, constellation):
    """E[x_B^2] of the unscaled constellation under ``dist``."""
    pmf = _pmf_of(dist)
    if pmf.shape != (constellation.size,):
        raise ValueError("distribution size does not match constellation")
    x = constellation.amplitudes.astype(float)
    return float(pmf @ (x * x))


def average_power(dist, scaled):
    """d^2 * sum_b P(b) x_b^2."""
    return scaled.d**2 * second_moment(dist, scaled.base)


def scaling_for_power(dist, constellation, snr):
    """Largest d with d^2 E[x_B^2] <= snr."""
    return float(np.sqrt(snr / second_moment(dist, constellation)))
