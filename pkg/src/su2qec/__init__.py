"""Covariant approximate error-correcting codes built from SU(2) irrep states."""

__version__ = "0.1.0"

from .angmom import (HalfInt, binomial_moment, closed_form_moment, ladder_coeff,
                     ladder_inverse_sum, log_binomial, stretched_cg)
from .channels import (KrausChannel, MomentMatrix, apply_kraus, complementary_moment_matrix,
                       random_dlocal_channel, random_multiset_channel)
from .codes import (CodeSpec, analyze_generic, fidelity_from_factors, inaccuracy_erasure,
                    inaccuracy_generic, kl_diagonal_bound_check, kl_offdiagonal_check,
                    matrix_fidelity)
from .errors import (ConfigError, DimensionGuardError, DomainError, NumericalContractError,
                     PremiseError, SU2QECError)
from .metrology import (fidelity_erased_codewords, fidelity_expansion, lemma3_asymptotic,
                        measurement_estimate, qfi_erased_probe, qfi_sld, verify_qfi_loss_bound)
from .statevec import (DensityMatrix, QuditRegister, StateVector, dicke_state, evolve_phase,
                       lower_state, partial_trace, probe_state, scar_state)
from .sweep import SweepConfig, fit_loglog_slope, run_sweep

__all__ = [name for name in dir() if not name.startswith("_")]
