"""Divisible-load scheduling on single-level trees with time-varying speeds."""
from .classic import solve_time_invariant
from .deterministic import (OracleReport, SearchMode, SolverError, SolverOptions, algorithm_one,
                            algorithm_two, replay_oracle, solve_stage_time)
from .metrics import sequential_time_invariant, sequential_time_varying, speedup
from .mm1 import (FadingWindow, MM1Params, baseline_wbar, estimate_lambda, estimate_mu,
                  simulate_background)
from .model import (BackgroundTrace, ControlMode, HypervisorFunction, NetworkSpec, Schedule,
                    StepProfile, equivalent_w, equivalent_z, integrate_reciprocal,
                    trace_to_profile)
from .stochastic import (InitialGuess, StochasticOutcome, baseline_schedule, iterative,
                         simulation_based, solve_linear_with_bars)

__version__ = "0.1.0"
