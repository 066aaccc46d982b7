"""Feedback sequence optimization for stop feedback codes over Markov sources."""

from ._core import (
    ConvergenceError,
    DecodePmf,
    ExperimentRow,
    MdpModel,
    PeriodicBaseline,
    PmfMeta,
    SimReport,
    SolveResult,
    SourceModel,
    best_periodic,
    build_aoii_mdp,
    build_delay_mdp,
    channel_capacity,
    decode_threshold,
    estimate_pmf,
    expected_delay,
    extract_feedback_sequence,
    feedback_penalty,
    load_pmf,
    packet_success,
    policy_average_cost,
    run_experiment,
    rvi_solve,
    save_pmf,
    sequence_policy,
    simulate,
    snr_linear,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DecodePmf",
    "ExperimentRow",
    "MdpModel",
    "PeriodicBaseline",
    "PmfMeta",
    "SimReport",
    "SolveResult",
    "SourceModel",
    "best_periodic",
    "build_aoii_mdp",
    "build_delay_mdp",
    "channel_capacity",
    "decode_threshold",
    "estimate_pmf",
    "expected_delay",
    "extract_feedback_sequence",
    "feedback_penalty",
    "load_pmf",
    "packet_success",
    "policy_average_cost",
    "run_experiment",
    "rvi_solve",
    "save_pmf",
    "sequence_policy",
    "simulate",
    "snr_linear",
]
