"""Entropies, divergences and the CM / BICM / SS-BMD rate functionals.

All logarithms are base 2; rates are in bits per real channel use.
"""

from dataclasses import dataclass

import numpy as np

from .channel import bit_marginal_channel

PMF_TOL = 1e-12


def _plogp(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def check_pmf(p, tol=PMF_TOL):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("pmf must be a non-empty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("pmf entries must be finite and non-negative")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"pmf sums to {p.sum():.15g}, not 1")
    return p


def entropy(p):
    """H(p) in bits with 0 log 0 = 0."""
    p = check_pmf(p, tol=1e-9)
    return float(-_plogp(p).sum())


def kl_divergence(p, q):
    """D(p || q) in bits; ``inf`` when p puts mass outside the support of q."""
    p = check_pmf(p, tol=1e-9)
    q = check_pmf(q, tol=1e-9)
    if p.shape != q.shape:
        raise ValueError("pmfs have different sizes")
    pos = p > 0
    if np.any(q[pos] == 0):
        return float("inf")
    return float(np.sum(p[pos] * np.log2(p[pos] / q[pos])))


def joint_mi(joint):
    """I(X;Y) of a joint pmf given as a 2-D array."""
    joint = np.asarray(joint, dtype=float)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    return float(_plogp(joint).sum() - _plogp(px).sum() - _plogp(py).sum())


@dataclass(frozen=True)
class LabelDistribution:
    """Distribution P_B over the 2^m labels, indexed by label integer (B1 = MSB)."""

    m: int
    pmf: np.ndarray

    def __post_init__(self):
        pmf = check_pmf(self.pmf)
        if pmf.size != 2**self.m:
            raise ValueError(f"expected {2**self.m} probabilities, got {pmf.size}")
        pmf = pmf.copy()
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    @classmethod
    def uniform(cls, m):
        return cls(m, np.full(2**m, 2.0**-m))

    @classmethod
    def point_mass(cls, m, label):
        pmf = np.zeros(2**m)
        pmf[label] = 1.0
        return cls(m, pmf)

    @classmethod
    def from_bit_probs(cls, p_one):
        """Product distribution with P(B_i = 1) = p_one[i-1]."""
        p_one = np.asarray(p_one, dtype=float)
        m = p_one.size
        bits = (np.arange(2**m)[:, None] >> np.arange(m - 1, -1, -1)) & 1
        pmf = np.prod(np.where(bits == 1, p_one, 1.0 - p_one), axis=1)
        return cls(m, pmf / pmf.sum())

    @classmethod
    def sign_times(cls, sub_pmf, p_sign_one=0.5):
        """P_B = P_B1 x P_S with S = (B2..Bm) indexed by its own label integer."""
        sub_pmf = check_pmf(sub_pmf, tol=1e-9)
        m = int(np.log2(sub_pmf.size)) + 1
        if 2 ** (m - 1) != sub_pmf.size:
            raise ValueError("sub-label pmf size must be a power of two")
        pmf = np.concatenate([(1 - p_sign_one) * sub_pmf, p_sign_one * sub_pmf])
        return cls(m, pmf / pmf.sum())

    @property
    def bits(self):
        return (np.arange(2**self.m)[:, None] >> np.arange(self.m - 1, -1, -1)) & 1

    def marginal(self, i):
        """(P(B_i = 0), P(B_i = 1)), with ``i`` counting from 1."""
        bit = self.bits[:, i - 1]
        return np.array([self.pmf[bit == 0].sum(), self.pmf[bit == 1].sum()])

    def sub_pmf(self):
        """Distribution of S = (B2, ..., Bm), marginalizing out B1."""
        half = 2 ** (self.m - 1)
        return self.pmf[:half] + self.pmf[half:]

    def marginal_product(self):
        return LabelDistribution.from_bit_probs([self.marginal(i)[1] for i in range(1, self.m + 1)])

    def entropy(self):
        return entropy(self.pmf)

    def bit_entropies(self):
        return np.array([entropy(self.marginal(i)) for i in range(1, self.m + 1)])

    def correlation_penalty(self):
        """sum_i H(B_i) - H(B), never negative."""
        return float(max(self.bit_entropies().sum() - self.entropy(), 0.0))

    def is_product(self, tol=1e-12):
        return bool(np.max(np.abs(self.marginal_product().pmf - self.pmf)) <= tol)


def mutual_information(dist, ch):
    """I(B; Q) in bits."""
    return joint_mi(ch.joint(dist))


def bit_mi(dist, ch, i):
    """I(B_i; Q) in bits; ``i`` counts from 1."""
    return joint_mi(bit_marginal_channel(ch, dist, i))


def bicm_sum_rate(dist, ch):
    """sum_i I(B_i; Q), the bit-metric rate for independent bit levels."""
    joint = ch.joint(dist)
    bits = dist.bits
    total = 0.0
    for i in range(dist.m):
        j = np.stack([joint[bits[:, i] == 0].sum(axis=0), joint[bits[:, i] == 1].sum(axis=0)])
        total += joint_mi(j)
    return total


def ss_bmd_rate(dist, ch):
    """sum_i I(B_i; Q) - [sum_i H(B_i) - H(B)]."""
    return bicm_sum_rate(dist, ch) - dist.correlation_penalty()


@dataclass(frozen=True)
class RateReport:
    snr_db: float
    cm: float
    bicm_sum: float
    ss_bmd: float
    correlation_penalty: float


def rate_report(dist, ch):
    """All three functionals of one (P_B, d) pair."""
    from .constellation import average_power

    snr = average_power(dist, ch.scaled)
    bicm = bicm_sum_rate(dist, ch)
    penalty = dist.correlation_penalty()
    return RateReport(
        snr_db=float(10 * np.log10(snr)) if snr > 0 else float("-inf"),
        cm=mutual_information(dist, ch),
        bicm_sum=bicm,
        ss_bmd=bicm - penalty,
        correlation_penalty=penalty,
    )


def shannon_capacity(snr):
    """1/2 log2(1 + snr) for linear snr."""
    return 0.5 * np.log2(1.0 + np.asarray(snr, dtype=float))


def db(x):
    return 10.0 * np.log10(x)


def undb(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
