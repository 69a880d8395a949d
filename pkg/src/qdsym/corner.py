"""Finite-truncation laboratory: grid derivatives and nested corner algebras.

The ambient algebra is a single full matrix block M_n; the corner algebra
A_m is the subalgebra of matrices supported on the first m basis vectors,
V_m their span.  Grid derivatives are central-difference matrices with
Dirichlet (zero-padded) boundary, exactly real antisymmetric, so that the
double-commutator generator built from them maps A_m into A_{m+bandwidth}.

For N > 1 the grid is flattened lexicographically (axis 1 slowest), and the
corner nesting follows the flattened index; the derivative along axis j
then has bandwidth n^(N-j), which the corner bounds inherit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import blockalg, superop
from .blockalg import (AlgebraElement, BlockStructure, ValidationError,
                       basis_info)
from .superop import CheckReport, SuperOperator

SUPPORT_THRESHOLD = 1e-13


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    points_per_axis: int
    spacing: float = 1.0

    def __post_init__(self):
        if self.dimension < 1 or self.points_per_axis < 1:
            raise ValidationError("grid dimension and size must be positive")
        if self.spacing <= 0:
            raise ValidationError("grid spacing must be positive")

    @property
    def total_points(self):
        return self.points_per_axis ** self.dimension

    @property
    def structure(self):
        return BlockStructure((self.total_points,))


def _central_difference(n, spacing):
    D = np.zeros((n, n))
    h = 1.0 / (2.0 * spacing)
    for i in range(n - 1):
        D[i, i + 1] = h
        D[i + 1, i] = -h
    return D


def grid_derivative(grid, axis):
    """Central-difference d/dx_axis on the flattened grid; axis is 1-based.

    Exactly real antisymmetric (hence anti-self-adjoint), bandwidth
    n^(N-axis) in the flattened index.
    """
    N, n = grid.dimension, grid.points_per_axis
    if not 1 <= axis <= N:
        raise ValidationError(f"axis must be in 1..{N}")
    D1 = _central_difference(n, grid.spacing)
    before = n ** (axis - 1)
    after = n ** (N - axis)
    D = np.kron(np.kron(np.eye(before), D1), np.eye(after))
    return AlgebraElement(grid.structure, [D])


def grid_family(grid):
    """All N axis derivatives as a derivation family."""
    from .derivgen import DerivationFamily
    return DerivationFamily(grid.structure,
                            tuple(grid_derivative(grid, j + 1)
                                  for j in range(grid.dimension)))


def _require_single_block(structure):
    if structure.n_blocks != 1:
        raise ValidationError("corner analysis requires a single-block algebra")
    return structure.dims[0]


def _corner_sa_basis(structure, m):
    """Self-adjoint Tr-orthonormal basis of the corner A_m, embedded in the
    ambient block (m^2 elements)."""
    n = _require_single_block(structure)
    if m > n:
        raise ValidationError("corner exceeds ambient dimension")
    out = np.zeros((m * m, n, n), dtype=complex)
    out[0, :m, :m] = np.eye(m) / np.sqrt(m)
    if m > 1:
        out[1:, :m, :m] = blockalg._block_basis_dense(m)
    return out


def _support_size(mat, threshold):
    mask = np.abs(mat) > threshold
    if not mask.any():
        return 0
    rows, cols = np.nonzero(mask)
    return int(max(rows.max(), cols.max())) + 1


def corner_mapping_bound(L, m, threshold=SUPPORT_THRESHOLD):
    """Minimal c with L(A_m) inside A_c, by support inspection."""
    n = _require_single_block(L.structure)
    if m > n:
        raise ValidationError("corner exceeds ambient dimension")
    bound = m
    for x in _corner_sa_basis(L.structure, m):
        out = superop.apply(L, AlgebraElement(L.structure, [x]))
        bound = max(bound, _support_size(out.blocks[0], threshold))
    return bound


def check_vn_invariance(alpha, m, n, tol=1e-10):
    """alpha(x) must kill V_n-perp and preserve V_n, for self-adjoint x in A_m."""
    amb = _require_single_block(alpha.structure)
    residual = 0.0
    worst = None
    for i, x in enumerate(_corner_sa_basis(alpha.structure, m)):
        a = superop.apply(alpha, AlgebraElement(alpha.structure, [x])).blocks[0]
        r = 0.0
        if n < amb:
            cols = np.linalg.norm(a[:, n:], axis=0)
            r = float(cols.max(initial=0.0))
            r = max(r, float(np.linalg.norm(a[n:, :n], 2)) if n > 0 else 0.0)
        if r > residual:
            residual, worst = r, i
    return CheckReport("vn-invariance", residual, tol, residual <= tol,
                       detail={"m": m, "n": n, "worst_basis_index": worst})


def check_traceless_derivation(alpha, m, tol=1e-12):
    """tau(alpha(x)) must vanish on A_m (alpha is implemented by a
    commutator on every corner)."""
    residual = 0.0
    for x in _corner_sa_basis(alpha.structure, m):
        out = superop.apply(alpha, AlgebraElement(alpha.structure, [x]))
        residual = max(residual, abs(blockalg.trace(out)))
    return CheckReport("traceless-derivation", residual, tol, residual <= tol,
                       detail={"m": m})


def check_weak_form(L, alphas, m, tol=1e-10):
    """2 tau(x L(y)) = -sum_j tau(alpha_j(x) alpha_j(y)) = sum_j tau(x alpha_j^2(y))
    over the corner basis."""
    _require_single_block(L.structure)
    w = L.structure.weights[0]
    X = _corner_sa_basis(L.structure, m)
    d = X.shape[0]

    def batch_apply(op, elems):
        out = np.empty_like(elems)
        for i in range(elems.shape[0]):
            out[i] = superop.apply(
                op, AlgebraElement(op.structure, [elems[i]])).blocks[0]
        return out

    LY = batch_apply(L, X)
    T_L = w * np.einsum('aij,bji->ab', X, LY)        # tau(x_a L(y_b))
    acc1 = np.zeros((d, d), dtype=complex)
    acc2 = np.zeros((d, d), dtype=complex)
    for alpha in alphas:
        AX = batch_apply(alpha, X)
        AAX = batch_apply(alpha, AX)
        acc1 += w * np.einsum('aij,bji->ab', AX, AX)  # tau(a_j(x) a_j(y))
        acc2 += w * np.einsum('aij,bji->ab', X, AAX)  # tau(x a_j^2(y))
    r1 = float(np.abs(2.0 * T_L + acc1).max())
    r2 = float(np.abs(2.0 * T_L - acc2).max())
    residual = max(r1, r2)
    return CheckReport("weak-form", residual, tol, residual <= tol,
                       detail={"m": m, "carre_residual": r1,
                               "second_order_residual": r2})


def alpha_split(delta, tol=1e-10):
    """Split a derivation into its dagger-symmetric components.

    With delta_dagger(x) := delta(x*)*, returns (alpha_even, alpha_odd) =
    ((delta + delta_dagger)/2, i(delta_dagger - delta)/2); both satisfy
    alpha_dagger = alpha, and delta = alpha_even + i alpha_odd,
    delta_dagger = alpha_even - i alpha_odd.  Over the self-adjoint basis
    the matrix of delta_dagger is the entrywise conjugate of that of delta.
    """
    structure = delta.structure
    info = basis_info(structure)
    d = structure.dim
    # Leibniz validation on basis pairs
    G = [info.element(a) for a in range(d)]
    DG = [superop.apply(delta, g) for g in G]
    scale = max(delta.norm(), 1.0)
    leib = 0.0
    for a in range(d):
        for b in range(d):
            val = superop.apply(delta, G[a] @ G[b]) - DG[a] @ G[b] - G[a] @ DG[b]
            leib = max(leib, val.norm())
    if leib > tol * scale:
        raise ValidationError(f"not a derivation: Leibniz residual {leib:.3e}")
    M = delta.matrix
    even = SuperOperator(structure, 0.5 * (M + M.conj()))
    odd = SuperOperator(structure, 0.5j * (M.conj() - M))
    return even, odd
