"""Linear-programming receivers on factor graphs, with joint equalization and
decoding over intersymbol-interference channels as the worked application."""

from .codes import LinearCode, hamming_7_4, load_code, low_density_105
from .equalizer import (IsiChannel, JointSystem, Modulation, bpsk, build_lp4, build_lp5, build_system_graph,
                        brute_force_map, proakis_b, simulate_channel, snr_to_sigma)
from .errors import *  # noqa: F401,F403
from .factor_graph import (Factor, FactorGraph, check_injectivity, enumerate_behavior, is_valid, load_graph,
                           save_graph)
from .harness import ExperimentConfig, emit_results, fer_lower_bound, run_experiment
from .lp import LinearProgram, dump_lp, parse_lp_dump
from .pseudo import (CoverConfiguration, SignalMap, awgn_pseudoweight, pairwise_error_probability,
                     pseudodistance, realize_cover, verify_cover)
from .relaxation import (PolytopePoint, ReceiverFailure, build_lp2, build_lp3, extract_output, map_v,
                         map_v_inverse, solve_lp1, solve_relaxation)
from .simplex import SolveOptions, SolveResult, solve

__version__ = "0.1.0"
