"""Piecewise linear bit-LLR design and evaluation for BICM over fading.

Library layout:

- ``constellation``: Gray-labeled 8-AM / 16-QAM signal sets
- ``fading``: Rician/Rayleigh model, channel likelihoods, quadrature
- ``llr``: true / log-sum / piecewise linear LLR functions and templates
- ``measure``: Monte-Carlo bit-channel capacity measure
- ``optimizer``: concave parameter optimization with frozen samples
- ``ldpc``: regular LDPC construction, BP decoding, BER simulation
- ``density_evolution``: sampled DE thresholds with channel adapters
- ``cli``: command-line front end (``bicmllr`` entry point)
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("bicmllr")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .constellation import Constellation, build_8am, build_16qam, from_name
from .fading import ChannelSpec, FadingModel
from .llr import (
    LLR_CLIP,
    PiecewiseLinearLLR,
    bind_templates,
    make_template,
    params_from_json,
    params_to_json,
    true_nocsi_functions,
)
from .measure import bicm_capacity, bit_capacity, sample_llrs
from .optimizer import OptimizationProblem, optimize_boundaries, optimize_inner
from .ldpc import LdpcCode, ber_sim, construct_regular, read_alist, write_alist
from .density_evolution import de_run, find_threshold
