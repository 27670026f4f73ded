"""Biased walks in interlacement environments."""

from .environment import (
    STEP_ORDER,
    Environment,
    build_environment,
    check_detailed_balance,
    environment_from_sites,
    quenched_step,
    torus_environment,
)
from .walks import (
    ConeExitResult,
    WalkBatch,
    WalkRecord,
    WalkSetup,
    cone_exit_experiment,
    cone_exit_replica,
    summarize_cone_exits,
    cone_regions,
    corridor_exit_time,
    dyadic_checkpoints,
    run_walk,
    run_walks,
)
from .slab import SlabEnvironment
from .traps import (
    EscapeCheck,
    FrequencyCheck,
    SojournTable,
    TrapReport,
    detect_trap,
    find_trap,
    hand_built_trap,
    mouth_jump_check,
    plant_trap,
    straight_descent_check,
    trap_escape_check,
    trap_network_sites,
    trap_sojourn_experiment,
    trap_window,
)
from .d4 import D4Result, d4_trap_mode, detect_d4, hand_built_d4
