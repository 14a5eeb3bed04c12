"""Signal shaping with bit-metric decoding for ASK over the AWGN channel."""

__version__ = "0.1.0"

from .constellation import Constellation, ScaledConstellation, ask_points, average_power, brgc_labeling
from .channel import DiscretizedChannel, OutputQuantizer, discretize, quantize
from .infotheory import LabelDistribution, RateReport, bicm_sum_rate, entropy, kl_divergence, mutual_information, ss_bmd_rate
from .optimize import (
    OptimizationResult,
    bs_bicm_rate,
    cm_capacity,
    dot_analysis,
    kl_project_entropy,
    snr_for_rate,
    ss_bmd_heuristic,
    uniform_bicm_rate,
)
from .matcher import MatcherSpec, OverflowModel, dematch, match, overflow_prob_clt, overflow_prob_mc
from .fec import ParityCheckCode, bundled_code, decode_bp, encode_systematic, load_alist
from .txrx import FrameLayout, InterleaverSpec, make_interleaver, simulate_frame
