"""Eigendecomposition of block tridiagonal matrices through matrix polynomials."""

from .core import (BlockTridiagonalMatrix, MatrixParseError, NumericalError, StructureError, ValidationError,
                   ValidationReport, assemble_dense, matvec, read_matrix, validate, write_matrix)
from .jordan import JordanChain, chain_via_derivatives, chain_via_powers, jordan_analysis
from .matpoly import (MatrixPolynomial, MatrixPolynomialSequence, ScalarPolynomial, determinant_polynomial,
                      generate_sequence, generate_tilde_sequence)
from .spectral import (DefectReport, EigendecompositionResult, Spectrum, commuting_fast_path, compute_spectrum,
                       decompose, eigenvector_matrix, find_zeros, inverse_eigenvector_matrix, nullspace_basis)
from .spider import SpiderPlan, build_plan, fast_expansion, spider_matrix, spider_spectrum

__version__ = "0.1.0"
