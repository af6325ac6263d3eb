"""Frequency-domain identification of multirate (LPTV) feedback loops.

Lifts closed-loop data in time or frequency, estimates the lifted closed-loop
maps with the Local Polynomial Method, recovers the high-rate plant by the
indirect method and inverse lifting, and evaluates the Performance Frequency
Gain of the loop.
"""
from .errors import *  # noqa: F401,F403
from .signals import (LiftedSignal, LiftedSpectrum, Signal, Spectrum, bin_grid, dft, idft,
                      lift_frequency, lift_time, unlift_time)
from .systems import Frf, LptvSystem, LtiSystem, frf, frf_eval, simulate
from .lifting import (LiftKind, LiftedFrf, convert_freq_to_time, convert_time_to_freq, freq_lift,
                      freq_lift_lti, inverse_freq_lift, inverse_freq_lift_grid, inverse_time_lift,
                      inverse_time_lift_grid, modulation_matrix, time_lift, time_lift_lti)
from .multirate import (MultirateLoop, alias_transfer, closed_loop_output_spectrum, q_d,
                        simulate_loop)
from .lpm import LpmConfig, LpmFit, lpm_estimate
from .ident import (Excitation, ExperimentRecord, Method, PlantEstimate, alias_coupled_bins,
                    estimate_lifted_JS, etfe, lifted_estimate, model_error, naive_lpm,
                    recover_highrate_frf, recover_plant, run_experiment, run_pipeline)
from .pfg import PfgCurve, pfg_brute_force, pfg_closed_form, pfg_from_estimate, pfg_true
from .diagnostics import PerturbationProbe, first_order_bias_lifted, highrate_bias_from_lifted
from .fixtures import benchmark_loop, random_stable_lti

__version__ = "0.1.0"
