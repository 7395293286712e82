from ._core import (
    DataError,
    Error,
    FeasibilityEnv,
    MipInstance,
    NumericalError,
    ProblemKind,
    check,
    config_hash,
    derive_seed,
    evaluate_checkpoint,
    evaluate_fp,
    from_text,
    generate,
    load_instance,
    project_l1,
    resolve_config,
    run_fp,
    save_instance,
    summarize_lengths,
)

__all__ = [
    "DataError",
    "Error",
    "FeasibilityEnv",
    "MipInstance",
    "NumericalError",
    "ProblemKind",
    "check",
    "config_hash",
    "derive_seed",
    "evaluate_checkpoint",
    "evaluate_fp",
    "from_text",
    "generate",
    "load_instance",
    "project_l1",
    "resolve_config",
    "run_fp",
    "save_instance",
    "summarize_lengths",
]
