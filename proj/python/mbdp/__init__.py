"""Dyna-style model-based RL with double-dropout planning.

The heavy lifting lives in the compiled extension; this package re-exports
its surface: environments, replay buffers, the exact risk calculators and
the training entry point.
"""

from ._core import (  # noqa: F401
    ContinuousEnv,
    DiscreteMDP,
    ReplayBuffer,
    TabularPolicy,
    TrainConfig,
    __version__,
    adversarial_return,
    cvar_p,
    cvar_split,
    discrepancy_bound,
    dropout_gap_bound,
    dropout_value,
    enumerate_returns,
    env_names,
    exact_dropout_return,
    exact_return,
    make_env,
    percentile_threshold,
    run_identity_checks,
    train,
    update_residual,
    var_p,
    worst_case_reweighting,
)
