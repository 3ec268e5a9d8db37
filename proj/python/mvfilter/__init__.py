"""Multiscale McKean-Vlasov simulation, averaging and filtering (C++ core)."""

from ._core import (
    Model,
    NumericalError,
    __version__,
    averaged_filter,
    averaging_rate,
    check_hypotheses,
    compute_Fbar,
    compute_hbar,
    contraction_curve,
    filter_convergence,
    hbar_decay_curve,
    inverse_moment,
    make_model,
    martingale_diagnostic,
    micro_step,
    ou_law,
    particle_filter,
    registered_models,
    sample_invariant,
    simulate,
    w2_decay_curve,
    wasserstein2,
    wasserstein2_assignment,
    with_constant_obs,
    with_zero_obs,
)

__all__ = [name for name in dir() if not name.startswith("_")]
