"""Arithmetic of the finite-dimensional block algebra A = (+)_k M_{n_k}.

Elements are block-diagonal complex matrices; the faithful trace is
tau(a) = sum_k w_k Tr(a_k) with configurable positive weights w_k.  The
centre of A is spanned by the block identity projections, and every
Hilbert-Schmidt computation below is taken with respect to the weighted
inner product <a, b> = tau(a* b).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class StructureMismatchError(ValueError):
    """Operands belong to different block structures."""


class ValidationError(ValueError):
    """An input violates a structural requirement (shape, adjointness, ...)."""


@dataclass(frozen=True)
class BlockStructure:
    """Shape and trace weights of the algebra (+)_k M_{n_k}."""

    dims: tuple
    weights: tuple = None

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if not dims or any(n < 1 for n in dims):
            raise ValidationError("block dims must be positive integers")
        if self.weights is None:
            weights = (1.0,) * len(dims)
        else:
            weights = tuple(float(w) for w in self.weights)
        if len(weights) != len(dims) or any(w <= 0 for w in weights):
            raise ValidationError("need one positive weight per block")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)

    @property
    def n_blocks(self):
        return len(self.dims)

    @property
    def dim(self):
        """Linear dimension d = sum_k n_k**2 of the algebra."""
        return sum(n * n for n in self.dims)

    @property
    def ambient_dim(self):
        """Size n = sum_k n_k of the ambient block-diagonal matrices."""
        return sum(self.dims)


class AlgebraElement:
    """A block-diagonal matrix, stored as one dense array per block."""

    __slots__ = ("structure", "blocks")

    def __init__(self, structure, blocks):
        blocks = tuple(np.asarray(b, dtype=complex) for b in blocks)
        if len(blocks) != structure.n_blocks:
            raise StructureMismatchError("wrong number of blocks")
        for b, n in zip(blocks, structure.dims):
            if b.shape != (n, n):
                raise StructureMismatchError(
                    f"block shape {b.shape} does not match n={n}")
        self.structure = structure
        self.blocks = blocks

    # -- arithmetic -------------------------------------------------------

    def _check(self, other):
        if self.structure != other.structure:
            raise StructureMismatchError("elements live on different structures")

    def __add__(self, other):
        self._check(other)
        return AlgebraElement(self.structure,
                              [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._check(other)
        return AlgebraElement(self.structure,
                              [a - b for a, b in zip(self.blocks, other.blocks)])

    def __mul__(self, scalar):
        return AlgebraElement(self.structure, [scalar * b for b in self.blocks])

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __matmul__(self, other):
        self._check(other)
        return AlgebraElement(self.structure,
                              [a @ b for a, b in zip(self.blocks, other.blocks)])

    def adjoint(self):
        return AlgebraElement(self.structure,
                              [b.conj().T for b in self.blocks])

    def embed(self):
        """Dense ambient block-diagonal matrix of size n x n."""
        n = self.structure.ambient_dim
        out = np.zeros((n, n), dtype=complex)
        off = 0
        for b, m in zip(self.blocks, self.structure.dims):
            out[off:off + m, off:off + m] = b
            off += m
        return out

    def norm(self):
        """Operator norm: max over blocks of the spectral norm."""
        return max(np.linalg.norm(b, 2) for b in self.blocks)

    def __repr__(self):
        return f"AlgebraElement(dims={self.structure.dims})"


def mul(a, b):
    return a @ b


def adjoint(a):
    return a.adjoint()


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def trace(a):
    return complex(sum(w * np.trace(b)
                       for w, b in zip(a.structure.weights, a.blocks)))


def hs_inner(a, b):
    """Weighted Hilbert-Schmidt inner product tau(a* b)."""
    a._check(b)
    return complex(sum(w * np.sum(x.conj() * y)
                       for w, x, y in zip(a.structure.weights, a.blocks, b.blocks)))


def operator_norm(a):
    return a.norm()


def zero(structure):
    return AlgebraElement(structure,
                          [np.zeros((n, n)) for n in structure.dims])


def identity(structure):
    return AlgebraElement(structure, [np.eye(n) for n in structure.dims])


@dataclass(frozen=True)
class CenterElement:
    """A central element (+)_k lambda_k I_{n_k}, stored as K scalars."""

    structure: BlockStructure
    scalars: tuple

    def __post_init__(self):
        scalars = tuple(complex(z) for z in self.scalars)
        if len(scalars) != self.structure.n_blocks:
            raise StructureMismatchError("need one scalar per block")
        object.__setattr__(self, "scalars", scalars)

    def embed(self):
        return AlgebraElement(self.structure,
                              [z * np.eye(n)
                               for z, n in zip(self.scalars, self.structure.dims)])


def central_projections(structure):
    """The block identities P_k, as CenterElements; sum_k P_k = 1."""
    K = structure.n_blocks
    return [CenterElement(structure, tuple(1.0 if j == k else 0.0 for j in range(K)))
            for k in range(K)]


def center_project(a):
    """Central component of a: z_k = Tr(a_k)/n_k per block."""
    return CenterElement(a.structure,
                         tuple(np.trace(b) / n
                               for b, n in zip(a.blocks, a.structure.dims)))


def is_central(a, tol=1e-10):
    """True when a commutes with the whole basis to within tol."""
    res = 0.0
    for b in a.blocks:
        m = b.shape[0]
        if m == 1:
            continue
        for g in _block_basis_dense(m):
            res = max(res, np.linalg.norm(b @ g - g @ b, 2))
            if res > tol:
                return False
    return res <= tol


# -- orthonormal basis ----------------------------------------------------
#
# Global ordering: indices 0..K-1 are the normalised central projections
# P_k / sqrt(w_k n_k); after those come the traceless generalised Gell-Mann
# elements of block 0, then block 1, etc.  All basis elements are
# self-adjoint, which the superop module relies on.


@functools.lru_cache(maxsize=32)
def _block_basis_dense(m):
    """Tr-orthonormal self-adjoint traceless basis of M_m, shape (m*m-1, m, m).

    Order: symmetric pairs (i<j), antisymmetric pairs (i<j), then the
    diagonal elements diag(1,..,1,-l,0,..)/sqrt(l(l+1)).
    """
    out = np.zeros((m * m - 1, m, m), dtype=complex)
    idx = 0
    s = 1.0 / np.sqrt(2.0)
    for i in range(m):
        for j in range(i + 1, m):
            out[idx, i, j] = s
            out[idx, j, i] = s
            idx += 1
    for i in range(m):
        for j in range(i + 1, m):
            out[idx, i, j] = -1j * s
            out[idx, j, i] = 1j * s
            idx += 1
    for l in range(1, m):
        v = np.zeros(m)
        v[:l] = 1.0
        v[l] = -l
        out[idx, range(m), range(m)] = v / np.sqrt(l * (l + 1))
        idx += 1
    return out


class _BasisInfo:
    """Index bookkeeping and sparse vectorisation maps for a structure.

    W maps basis coefficients to the stacked column-major vectorisation of
    the blocks; Wd is its weighted dual, so that Wd^H @ W = I and
    coefficients of a are Wd^H @ vecstack(a).
    """

    def __init__(self, structure):
        self.structure = structure
        dims, weights = structure.dims, structure.weights
        K, d = structure.n_blocks, structure.dim
        self.vec_dim = sum(n * n for n in dims)  # == d
        self.vec_offsets = np.cumsum([0] + [n * n for n in dims])

        self.block_of = np.empty(d, dtype=int)
        self.block_of[:K] = np.arange(K)
        self.traceless_ranges = []
        pos = K
        for k, n in enumerate(dims):
            cnt = n * n - 1
            self.traceless_ranges.append((pos, pos + cnt))
            self.block_of[pos:pos + cnt] = k
            pos += cnt

        rows, cols, vals = [], [], []
        for k, (n, w) in enumerate(zip(dims, weights)):
            off = self.vec_offsets[k]
            scale = 1.0 / np.sqrt(w)
            # normalised identity P_k / sqrt(w n)
            diag_vecidx = off + np.arange(n) * (n + 1)
            rows.extend(diag_vecidx)
            cols.extend([k] * n)
            vals.extend([1.0 / np.sqrt(w * n)] * n)
            lo, hi = self.traceless_ranges[k]
            gm = _block_basis_dense(n)
            for a in range(n * n - 1):
                rr, cc = np.nonzero(gm[a])
                rows.extend(off + rr + n * cc)  # column-major vec index
                cols.extend([lo + a] * len(rr))
                vals.extend(gm[a][rr, cc] * scale)
        W = sp.coo_array((vals, (rows, cols)),
                         shape=(self.vec_dim, d), dtype=complex).tocsc()
        self.W = W
        # weighted dual: multiply block segment by w_k
        wvec = np.concatenate([np.full(n * n, w) for n, w in zip(dims, weights)])
        self.Wd = sp.diags_array(wvec) @ W

    def block_indices(self, k):
        lo, hi = self.traceless_ranges[k]
        return [k] + list(range(lo, hi))

    def vecstack(self, a):
        return np.concatenate([b.flatten(order="F") for b in a.blocks])

    def unstack(self, v):
        dims = self.structure.dims
        blocks = []
        for k, n in enumerate(dims):
            seg = v[self.vec_offsets[k]:self.vec_offsets[k + 1]]
            blocks.append(seg.reshape(n, n, order="F"))
        return AlgebraElement(self.structure, blocks)

    def coefficients(self, a):
        """hs_inner(G_alpha, a) for every basis element, as a vector."""
        return self.Wd.conj().T @ self.vecstack(a)

    def from_coefficients(self, c):
        return self.unstack(self.W @ np.asarray(c, dtype=complex))

    def element(self, alpha):
        """Materialise basis element G_alpha."""
        e = np.zeros(self.structure.dim)
        e[alpha] = 1.0
        return self.from_coefficients(e)


@functools.lru_cache(maxsize=32)
def basis_info(structure):
    return _BasisInfo(structure)


def orthonormal_basis(structure):
    """The d self-adjoint basis elements; first K are normalised central
    projections, the rest are traceless."""
    info = basis_info(structure)
    return [info.element(a) for a in range(structure.dim)]


def random_element(structure, seed):
    """Random element with i.i.d. standard complex Gaussian entries."""
    rng = np.random.default_rng(seed)
    blocks = [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
              for n in structure.dims]
    return AlgebraElement(structure, blocks)


def random_antiselfadjoint(structure, seed):
    """Random H with H* = -H exactly; entries (X - X*)/2 for Gaussian X."""
    x = random_element(structure, seed)
    return AlgebraElement(structure,
                          [(b - b.conj().T) / 2.0 for b in x.blocks])


def random_selfadjoint(structure, seed):
    x = random_element(structure, seed)
    return AlgebraElement(structure,
                          [(b + b.conj().T) / 2.0 for b in x.blocks])
