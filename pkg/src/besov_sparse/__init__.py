"""Besov-type norms, level-set sparseness and a Navier-Stokes regularity monitor on periodic 3D grids."""
from .errors import (BesovSparseError, CalibrationError, DegenerateError, FormatError, HypothesisViolation,
                     InvalidInputError, RejectedStep)
from .fields import (Grid3, LevelSet, ScalarField, VectorField, component_superlevel, linf_norm, read_field,
                     scalar_superlevel, write_field)
from .lp import besov_11_fd, besov_inf_inf, build_lp_bank, dual_lower_bound, lp_block, lp_reconstruct
from .sparse import mixed, remark_3d_implies_1d, semi_mixed, sparseness_1d, sparseness_3d

__version__ = "0.1.0"
