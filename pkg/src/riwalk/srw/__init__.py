"""Simple random walk on Z^3: hitting times, escape probabilities, Green's function,
one-dimensional oracles and the trap loop event."""

from .green import green_function, green_many, green_matrix, green_oracle
from .walks import (
    HittingRecord,
    TruncationRule,
    coordinate_steps,
    escape_probability,
    gamblers_ruin,
    hit_probability,
    loop_event_exact,
    loop_event_probability,
    loop_excursion_exact,
    run_until_hit,
    stern_conditional_mean,
    stern_conditional_stats,
    straight_segment_factor,
)

__all__ = [
    "HittingRecord", "TruncationRule", "coordinate_steps", "escape_probability", "gamblers_ruin",
    "green_function", "green_many", "green_matrix", "green_oracle", "hit_probability",
    "loop_event_exact", "loop_event_probability", "loop_excursion_exact", "run_until_hit",
    "stern_conditional_mean", "stern_conditional_stats", "straight_segment_factor",
]
