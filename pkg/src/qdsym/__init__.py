"""Symmetric quantum dynamical semigroups on finite block algebras.

Core objects: block algebras with a weighted trace (blockalg), linear maps
and generator checks (superop), double-commutator generators from
derivation families (derivgen), the constructive converse recovering a
family from a symmetric conservative CCP generator (extract), classical
Brownian dilations (dilate), and the grid/corner truncation laboratory
(corner).  The cli module exposes everything as a batch tool.
"""
from .blockalg import (AlgebraElement, BlockStructure, CenterElement,
                       StructureMismatchError, ValidationError,
                       anticommutator, basis_info, center_project,
                       central_projections, commutator, hs_inner, identity,
                       is_central, orthonormal_basis, trace, zero)
from .corner import GridSpec, alpha_split, corner_mapping_bound, grid_derivative
from .derivgen import DerivationFamily, build, normalize_central, random_family
from .dilate import DilationConfig, DilationEstimate, compare_with_semigroup, simulate
from .extract import (ExtractionError, ExtractionResult, PreconditionFailed,
                      RoundTripFailed, decompose, roundtrip_fuzz)
from .superop import (CheckReport, KernelSizeError, SuperOperator, apply,
                      check_ccp, check_conservative, check_cp_map,
                      check_symmetric, compose, dissipation, exp_semigroup,
                      from_hamiltonian, from_kraus, from_map, gkls,
                      identity_map, relation2_check, zero_map)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
