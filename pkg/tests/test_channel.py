import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssbmd.channel import (
    DegenerateChannelWarning,
    OutputQuantizer,
    awgn,
    bit_marginal_channel,
    channel_from_edges,
    discretize,
    quantize,
    transmit,
    uniform_edges,
)
from ssbmd.constellation import Constellation, ScaledConstellation
from ssbmd.infotheory import LabelDistribution, mutual_information

import oracles


def scaled(m, d):
    return ScaledConstellation(Constellation(m), d)


def test_binary_two_bin_transition():
    ch = channel_from_edges(scaled(1, 1.0), [-np.inf, 0.0, np.inf])
    p1 = oracles.phi(1.0)
    assert ch.transition == pytest.approx(np.array([[p1, 1 - p1], [1 - p1, p1]]), abs=1e-15)
    assert p1 == pytest.approx(0.8413, abs=1e-4)


@given(st.integers(1, 4), st.floats(0.0, 5.0), st.integers(2, 64))
def test_rows_are_pmfs(m, d, bins):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateChannelWarning)
        ch = discretize(scaled(m, d), bins)
    assert np.all(ch.transition >= 0)
    assert np.allclose(ch.transition.sum(axis=1), 1.0, atol=1e-12)


def test_transition_matches_cdf_oracle():
    s = scaled(2, 0.7)
    ch = discretize(s, 16, span_sigmas=3.0)
    ref = oracles.transition(s.amplitudes.tolist(), ch.bin_edges.tolist())
    assert ch.transition == pytest.approx(np.array(ref), abs=1e-14)


def test_interior_bins_uniform_and_span():
    ch = discretize(scaled(3, 0.5), 512)
    e = ch.bin_edges
    assert e[0] == -np.inf and e[-1] == np.inf
    widths = np.diff(e[1:-1])
    assert np.allclose(widths, widths[0])
    half = 0.5 * 7 + 4.0
    assert e[1] == pytest.approx(-half + 2 * half / 512)


def test_zero_scaling_warns_and_rows_equal():
    with pytest.warns(DegenerateChannelWarning):
        ch = discretize(scaled(3, 0.0), 32)
    assert np.allclose(ch.transition, ch.transition[0])
    assert ch.degenerate


def test_invalid_parameters():
    with pytest.raises(ValueError):
        discretize(scaled(2, 1.0), 1)
    with pytest.raises(ValueError):
        discretize(scaled(2, 1.0), 8, span_sigmas=0)
    with pytest.raises(ValueError):
        channel_from_edges(scaled(2, 1.0), [0.0, 1.0, np.inf])


def test_bit_marginal_single_bit_is_half_transition():
    ch = discretize(scaled(1, 1.0), 8)
    j = bit_marginal_channel(ch, LabelDistribution.uniform(1), 1)
    assert j == pytest.approx(0.5 * ch.transition)


def test_bit_marginal_point_mass():
    ch = discretize(scaled(3, 1.0), 8)
    b = 0b101
    dist = LabelDistribution.point_mass(3, b)
    for i in (1, 2, 3):
        j = bit_marginal_channel(ch, dist, i)
        a = (b >> (3 - i)) & 1
        assert j[a] == pytest.approx(ch.transition[b])
        assert np.all(j[1 - a] == 0)


@given(st.lists(st.floats(0.01, 1), min_size=8, max_size=8), st.floats(0.1, 3.0))
def test_bit_marginal_matches_enumeration(w, d):
    ch = discretize(scaled(3, d), 4)
    dist = LabelDistribution(3, np.array(w) / sum(w))
    for i in (1, 2, 3):
        j = bit_marginal_channel(ch, dist, i)
        for a in (0, 1):
            for q in range(4):
                ref = sum(ch.transition[b, q] * dist.pmf[b] for b in range(8) if oracles.bit_of(b, i, 3) == a)
                assert j[a, q] == pytest.approx(ref, abs=1e-15)
        assert j.sum(axis=0) == pytest.approx(ch.output_pmf(dist), abs=1e-15)
        assert j.sum() == pytest.approx(1.0)


def test_bit_marginal_bad_index():
    ch = discretize(scaled(3, 1.0), 4)
    with pytest.raises(ValueError):
        bit_marginal_channel(ch, LabelDistribution.uniform(3), 4)


def test_transmit_noiseless():
    s = scaled(3, 0.5)
    assert transmit(s, 0b100, 0.0) == pytest.approx(3.5)
    with pytest.raises(ValueError):
        transmit(s, 8, 0.0)


def test_awgn_empirical_mean():
    s = scaled(3, 0.8)
    rng = np.random.default_rng(5)
    n = 20000
    y = awgn(s, np.full(n, 0b111), rng)
    assert abs(y.mean() - s.amplitudes[0b111]) < 4 / math.sqrt(n)
    assert y.std() == pytest.approx(1.0, abs=0.03)


def test_quantize_conventions():
    q = OutputQuantizer(np.array([-np.inf, -1.0, 0.0, 1.0, np.inf]))
    assert quantize(q, -5.0) == 0
    assert quantize(q, -1.0) == 1
    assert quantize(q, 0.0) == 2
    assert quantize(q, 1.0) == 3
    assert q(100.0) == 3


@given(st.lists(st.floats(-20, 20), min_size=1, max_size=50))
def test_quantize_matches_linear_scan(ys):
    q = OutputQuantizer.for_constellation(scaled(3, 1.1))
    e = q.bin_edges
    got = quantize(q, np.array(ys))
    for y, g in zip(ys, got):
        ref = max(i for i in range(q.num_levels) if e[i] <= y)
        assert g == ref


def test_five_bit_quantizer():
    q = OutputQuantizer.for_constellation(scaled(3, 1.0))
    assert q.num_levels == 32
    with pytest.raises(ValueError):
        OutputQuantizer(np.array([-np.inf, 1.0, 0.0, np.inf]))


def test_refinement_never_loses_information():
    s = scaled(2, 0.9)
    fine = discretize(s, 32, span_sigmas=3.0)
    coarse = channel_from_edges(s, fine.bin_edges[::2])
    dist = LabelDistribution.uniform(2)
    assert mutual_information(dist, fine) >= mutual_information(dist, coarse) - 1e-15


def test_512_bins_converged_at_15_db():
    const = Constellation(3)
    dist = LabelDistribution.uniform(3)
    d = math.sqrt(10**1.5 / 21.0)
    a = mutual_information(dist, discretize(ScaledConstellation(const, d), 512))
    b = mutual_information(dist, discretize(ScaledConstellation(const, d), 1024))
    assert abs(a - b) < 1e-4


def test_uniform_edges():
    e = uniform_edges(2.0, 4)
    assert e.tolist() == [-np.inf, -1.0, 0.0, 1.0, np.inf]
    with pytest.raises(ValueError):
        uniform_edges(0.0, 4)
