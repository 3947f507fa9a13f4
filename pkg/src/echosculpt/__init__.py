"""Minimum-time spin-echo schedules that rescale z and zz interactions."""

__version__ = "0.1.0"

from .model import (
    InfeasibleError,
    InteractionIndex,
    ParseError,
    PhaseTarget,
    SpinSystem,
    load_spin_system,
    load_target,
    lower_bound,
    naive_time,
)
from .pulseseq import PulseSequence, emit_pulses, round_times, simulate_phases
from .scheduler import (
    RrosConfig,
    Schedule,
    compile_schedule,
    merge_duplicate_columns,
    optimize_permutation,
    rros_solve,
    solve_schedule,
    symmetrize,
)
from .simplex import LpProblem, LpSolution, solve_lp
from .walsh import build_full_sign_matrix, build_refocusing_network, walsh_function
