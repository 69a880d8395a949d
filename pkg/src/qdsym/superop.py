"""Linear maps on the block algebra as d x d matrices, plus generator checks.

A SuperOperator stores the matrix M[alpha, beta] = <G_alpha, Lam(G_beta)>
over the self-adjoint orthonormal basis from blockalg.  Because every basis
element is self-adjoint, tau(Lam(G_a) G_b) = M[b, a], which the symmetry
check exploits, and the tau-adjoint of conjugation maps takes a simple
form.

Check conventions (see CheckReport): residuals are reported raw except for
the symmetry check, which is normalised by the superoperator norm; the
pass/fail verdict compares against tol scaled by the norm of the generator,
so that the default 1e-9 budget tracks the size of L.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import blockalg
from .blockalg import (AlgebraElement, StructureMismatchError, ValidationError,
                       basis_info)


class KernelSizeError(ValueError):
    """The positivity kernel would exceed the configured dense-size limit."""


class SuperOperator:
    """A linear map on the algebra, as its matrix in the orthonormal basis."""

    __slots__ = ("structure", "matrix")

    def __init__(self, structure, matrix):
        if sp.issparse(matrix):
            matrix = sp.csr_array(matrix, dtype=complex)
        else:
            matrix = np.asarray(matrix, dtype=complex)
        d = structure.dim
        if matrix.shape != (d, d):
            raise StructureMismatchError(
                f"superoperator matrix must be {d}x{d}, got {matrix.shape}")
        self.structure = structure
        self.matrix = matrix

    def dense(self):
        m = self.matrix
        return m.toarray() if sp.issparse(m) else m

    def norm(self):
        """Spectral norm of the matrix (the L2->L2 norm of the map)."""
        return float(np.linalg.norm(self.dense(), 2))

    def __add__(self, other):
        if self.structure != other.structure:
            raise StructureMismatchError("structures differ")
        return SuperOperator(self.structure, self.matrix + other.matrix)

    def __sub__(self, other):
        if self.structure != other.structure:
            raise StructureMismatchError("structures differ")
        return SuperOperator(self.structure, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return SuperOperator(self.structure, scalar * self.matrix)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SuperOperator(dims={self.structure.dims})"


def zero_map(structure):
    return SuperOperator(structure, np.zeros((structure.dim, structure.dim)))


def identity_map(structure):
    return SuperOperator(structure, np.eye(structure.dim))


def compose(outer, inner):
    """The map x -> outer(inner(x))."""
    if outer.structure != inner.structure:
        raise StructureMismatchError("structures differ")
    return SuperOperator(outer.structure, outer.matrix @ inner.matrix)


def apply(L, a):
    """Evaluate the map on an algebra element."""
    if L.structure != a.structure:
        raise StructureMismatchError("structures differ")
    info = basis_info(L.structure)
    return info.from_coefficients(L.matrix @ info.coefficients(a))


def from_map(structure, fn):
    """Superoperator of an arbitrary callable AlgebraElement -> AlgebraElement."""
    info = basis_info(structure)
    d = structure.dim
    cols = np.empty((d, d), dtype=complex)
    for beta in range(d):
        cols[:, beta] = info.coefficients(fn(info.element(beta)))
    return SuperOperator(structure, cols)


def _from_block_vec_reps(structure, vec_reps):
    """Assemble a block-preserving superoperator from per-block matrices.

    vec_reps[k] acts on the column-major vectorisation of block k; entries
    may be scipy sparse.  The weighted basis scalings cancel, so the result
    is independent of the trace weights.
    """
    info = basis_info(structure)
    d = structure.dim
    M = None
    for k, n in enumerate(structure.dims):
        idx = info.block_indices(k)
        Wb = _block_vec_basis(n)
        V = vec_reps[k]
        if not sp.issparse(V):
            V = np.asarray(V, dtype=complex)
        Mk = Wb.conj().T @ (V @ Wb)
        if structure.n_blocks == 1:
            # keep a sparse assembly sparse (large single-block maps with
            # local structure stay cheap to apply)
            return SuperOperator(structure, Mk)
        if sp.issparse(Mk):
            Mk = Mk.toarray()
        if M is None:
            M = np.zeros((d, d), dtype=complex)
        M[np.ix_(idx, idx)] = Mk
    return SuperOperator(structure, M)


def _block_vec_basis(n, sparse_threshold=24):
    """(n^2, n^2) matrix whose columns are vec_F of the Tr-orthonormal basis
    of M_n (identity first, then the traceless elements).  Sparse for large
    n (each basis element has at most n nonzero entries)."""
    if n >= sparse_threshold:
        # identical to the single-block unit-weight vectorisation map
        return blockalg.basis_info(blockalg.BlockStructure((n,))).W
    cols = np.zeros((n * n, n * n), dtype=complex)
    cols[:, 0] = (np.eye(n) / np.sqrt(n)).flatten(order="F")
    gm = blockalg._block_basis_dense(n)
    for a in range(n * n - 1):
        cols[:, 1 + a] = gm[a].flatten(order="F")
    return cols


def _vec_rep_blocks(L):
    """Per-block column-major vectorised matrices of a block-preserving map."""
    info = basis_info(L.structure)
    M = L.dense()
    out = []
    for k, n in enumerate(L.structure.dims):
        idx = info.block_indices(k)
        Wb = _block_vec_basis(n)
        out.append(Wb @ M[np.ix_(idx, idx)] @ Wb.conj().T)
    return out


def _sparse_or_dense(b, threshold=16):
    if b.shape[0] > threshold:
        return sp.csr_array(b)
    return b


def _kron(A, B):
    if sp.issparse(A) or sp.issparse(B):
        return sp.kron(A, B, format="csr")
    return np.kron(A, B)


def _eye(n, sparse):
    return sp.eye_array(n, format="csr") if sparse else np.eye(n)


def from_hamiltonian(H, tol=1e-9):
    """The derivation x -> i[H, x] for self-adjoint H."""
    defect = (H - H.adjoint()).norm()
    if defect > tol * max(1.0, H.norm()):
        raise ValidationError(f"H is not self-adjoint (defect {defect:.2e})")
    reps = []
    for b in H.blocks:
        n = b.shape[0]
        bb = _sparse_or_dense(b)
        use_sp = sp.issparse(bb)
        reps.append(1j * (_kron(_eye(n, use_sp), bb) - _kron(bb.T, _eye(n, use_sp))))
    return _from_block_vec_reps(H.structure, reps)


def from_kraus(R_list):
    """The completely positive map psi(x) = sum_j R_j* x R_j."""
    if not R_list:
        raise ValidationError("need at least one Kraus operator")
    structure = R_list[0].structure
    reps = [None] * structure.n_blocks
    for R in R_list:
        if R.structure != structure:
            raise StructureMismatchError("Kraus operators on different structures")
        for k, b in enumerate(R.blocks):
            term = _kron(b.T, b.conj().T)
            reps[k] = term if reps[k] is None else reps[k] + term
    return _from_block_vec_reps(structure, reps)


def gkls(R_list, k, H, tol=1e-9):
    """Christensen-Evans form L(a) = psi(a) + ka + ak + i[H,a]."""
    structure = k.structure
    for name, el in (("k", k), ("H", H)):
        defect = (el - el.adjoint()).norm()
        if defect > tol * max(1.0, el.norm()):
            raise ValidationError(f"{name} is not self-adjoint")
    psi = from_kraus(R_list) if R_list else zero_map(structure)
    reps = []
    for kb in k.blocks:
        n = kb.shape[0]
        reps.append(_kron(np.eye(n), kb) + _kron(kb.T, np.eye(n)))
    out = psi + _from_block_vec_reps(structure, reps) + from_hamiltonian(H, tol)
    return out


def dissipation(L, x, y):
    """Carre-du-champ partial(x, y) = L(x*y) - L(x*)y - x*L(y)."""
    xs = x.adjoint()
    return apply(L, xs @ y) - apply(L, xs) @ y - xs @ apply(L, y)


def exp_semigroup(L, t):
    """T_t = exp(tL) by scaling-and-squaring of the matrix exponential."""
    if t < 0:
        raise ValueError("semigroup time must be nonnegative")
    return SuperOperator(L.structure, scipy.linalg.expm(t * L.dense()))


# -- checks ---------------------------------------------------------------


@dataclass
class CheckReport:
    name: str
    residual: float
    tolerance: float
    passed: bool
    witness: AlgebraElement | None = None
    detail: dict = field(default_factory=dict)

    def __repr__(self):
        tag = "pass" if self.passed else "FAIL"
        return (f"CheckReport({self.name}: {tag}, residual={self.residual:.3e}, "
                f"tol={self.tolerance:.3e})")


def _scale(L):
    s = L.norm()
    return s if s > 0 else 1.0


def check_conservative(L, tol=1e-9):
    """residual = ||L(1)|| (operator norm)."""
    one = blockalg.identity(L.structure)
    val = apply(L, one)
    residual = val.norm()
    eff = tol * _scale(L)
    return CheckReport("conservative", residual, eff, residual <= eff,
                       witness=None if residual <= eff else val)


def check_symmetric(L, tol=1e-9):
    """Detailed balance tau(L(a)b) = tau(a L(b)), normalised by ||L||.

    Over the self-adjoint basis, tau(L(G_a) G_b) = M[b, a], so the residual
    is max |M - M^T| / ||L||.
    """
    M = L.matrix
    diff = abs(M - M.T)
    residual = float(diff.max()) / _scale(L)
    passed = residual <= tol
    witness = None
    detail = {}
    if not passed:
        if sp.issparse(diff):
            diff = diff.toarray()
        a, b = np.unravel_index(np.argmax(diff), diff.shape)
        info = basis_info(L.structure)
        witness = info.element(int(a))
        detail = {"pair": (int(a), int(b))}
    return CheckReport("symmetric", residual, tol, passed, witness, detail)


def _embedded_basis(structure):
    info = basis_info(structure)
    return [info.element(a).embed() for a in range(structure.dim)]


def _kernel_psd_report(name, L, values, tol):
    """Assemble the (d n)x(d n) kernel from per-pair ambient blocks and test
    positive semidefiniteness."""
    d, n = L.structure.dim, L.structure.ambient_dim
    K = np.zeros((d * n, d * n), dtype=complex)
    for a in range(d):
        for b in range(d):
            K[a * n:(a + 1) * n, b * n:(b + 1) * n] = values[a][b]
    herm_defect = float(np.abs(K - K.conj().T).max())
    lam = np.linalg.eigvalsh((K + K.conj().T) / 2.0)
    lam_min = float(lam[0])
    residual = max(0.0, -lam_min)
    eff = tol * _scale(L)
    passed = lam_min >= -eff and herm_defect <= eff
    return CheckReport(name, residual, eff, passed,
                       detail={"lambda_min": lam_min, "herm_defect": herm_defect})


def check_ccp(L, tol=1e-9, max_kernel_dim=6000):
    """Conditional complete positivity via the dissipation kernel
    [partial(G_a, G_b)] being PSD in the ambient block-matrix space."""
    d, n = L.structure.dim, L.structure.ambient_dim
    if d * n > max_kernel_dim:
        raise KernelSizeError(
            f"dissipation kernel of size {d * n} exceeds limit {max_kernel_dim}")
    info = basis_info(L.structure)
    G = [info.element(a) for a in range(d)]
    LG = [apply(L, g) for g in G]
    values = [[None] * d for _ in range(d)]
    for a in range(d):
        for b in range(d):
            # basis elements are self-adjoint, so G_a* = G_a
            val = apply(L, G[a] @ G[b]) - LG[a] @ G[b] - G[a] @ LG[b]
            values[a][b] = val.embed()
    return check_ccp_from_kernel(L, values, tol)


def check_ccp_from_kernel(L, values, tol):
    return _kernel_psd_report("ccp", L, values, tol)


def check_cp_map(T, tol=1e-9, max_kernel_dim=6000):
    """Complete positivity of a map via the Choi-type kernel [T(G_a G_b)]."""
    d, n = T.structure.dim, T.structure.ambient_dim
    if d * n > max_kernel_dim:
        raise KernelSizeError(
            f"positivity kernel of size {d * n} exceeds limit {max_kernel_dim}")
    info = basis_info(T.structure)
    G = [info.element(a) for a in range(d)]
    values = [[apply(T, G[a] @ G[b]).embed() for b in range(d)] for a in range(d)]
    return _kernel_psd_report("cp", T, values, tol)


def relation2_check(L, tol=1e-9):
    """The central compatibility relation partial(az, az) = z* partial(a,a) z.

    Polarising in a and in z (z runs over the span of the central
    projections P_k) reduces the relation to the finite family of identities

        partial(G_a P_k, G_b P_l) = P_k partial(G_a, G_b) P_l

    over basis pairs (a, b) and projection pairs (k, l).  Because each
    basis element is supported in a single block, G_a P_k is either G_a or
    zero, and partial values are block diagonal; the maximal violation
    therefore reduces to (i) the full norm of partial(G_a, G_b) for basis
    pairs in different blocks and (ii) the norm of the components of
    partial(G_a, G_b) outside the common block for same-block pairs.  On a
    single-block structure (a factor) every identity is trivially 0 = 0.
    """
    structure = L.structure
    K = structure.n_blocks
    if K == 1:
        return CheckReport("relation2", 0.0, tol * _scale(L), True,
                           detail={"note": "factor: trivial centre"})
    info = basis_info(structure)
    d = structure.dim
    G = [info.element(a) for a in range(d)]
    LG = [apply(L, g) for g in G]
    block_of = info.block_of
    residual = -1.0
    best = None
    for a in range(d):
        ka = int(block_of[a])
        for b in range(d):
            kb = int(block_of[b])
            if ka != kb:
                # G_a G_b = 0 structurally
                val = LG[a] @ G[b] + G[a] @ LG[b]
                r = val.norm()
                kk, ll = ka, kb
            else:
                val = apply(L, G[a] @ G[b]) - LG[a] @ G[b] - G[a] @ LG[b]
                # witness pair = (source block, block the dissipation leaks into)
                r, kk, ll = 0.0, ka, ka
                for k, blk in enumerate(val.blocks):
                    if k == ka:
                        continue
                    nb = float(np.linalg.norm(blk, 2))
                    if nb > r:
                        r, kk, ll = nb, ka, k
            if r > residual:
                residual = r
                best = (a, b, kk, ll)
    eff = tol * _scale(L)
    passed = residual <= eff
    witness = None
    detail = {}
    if best is not None:
        detail = {"pair": best[:2],
                  "projections": (f"P_{best[2] + 1}", f"P_{best[3] + 1}")}
        witness = G[best[0]]
    return CheckReport("relation2", residual, eff, passed, witness, detail)
