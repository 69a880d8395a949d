"""Generators built from families of anti-self-adjoint elements.

A derivation family (H_j) with H_j* = -H_j defines the double-commutator
generator L(a) = 1/2 sum_j [H_j, [H_j, a]], which is conservative,
trace-symmetric, conditionally completely positive and compatible with the
centre.  The family is unique only up to two gauges: additive central
shifts (fixed by normalize_central) and real-orthogonal mixing of the H_j
(left free).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import blockalg, superop
from .blockalg import AlgebraElement, StructureMismatchError, ValidationError


@dataclass(frozen=True)
class DerivationFamily:
    """A finite list of anti-self-adjoint elements; H_j* = -H_j holds
    exactly after construction (inputs are symmetrised, and rejected if the
    defect exceeds 1e-12 relative)."""

    structure: blockalg.BlockStructure
    H_list: tuple

    def __post_init__(self):
        fixed = []
        for H in self.H_list:
            if H.structure != self.structure:
                raise StructureMismatchError("family member on wrong structure")
            defect = (H + H.adjoint()).norm()
            if defect > 1e-12 * max(1.0, H.norm()):
                raise ValidationError(
                    f"family member is not anti-self-adjoint (defect {defect:.2e})")
            fixed.append(AlgebraElement(self.structure,
                                        [(b - b.conj().T) / 2.0 for b in H.blocks]))
        object.__setattr__(self, "H_list", tuple(fixed))

    def __len__(self):
        return len(self.H_list)


def build(family):
    """The generator L(a) = 1/2 sum_j [H_j, [H_j, a]] as a SuperOperator."""
    structure = family.structure
    if not family.H_list:
        return superop.zero_map(structure)
    reps = [None] * structure.n_blocks
    for H in family.H_list:
        for k, b in enumerate(H.blocks):
            n = b.shape[0]
            bb = superop._sparse_or_dense(b)
            use_sp = sp.issparse(bb)
            b2 = bb @ bb
            eye = superop._eye(n, use_sp)
            term = (0.5 * (superop._kron(eye, b2) + superop._kron(b2.T, eye))
                    - superop._kron(bb.T, bb))
            reps[k] = term if reps[k] is None else reps[k] + term
    return superop._from_block_vec_reps(structure, reps)


def r_operator(family):
    """The stacked ambient matrix R = vstack(H_j), the map u -> (+)_j H_j u.

    Satisfies ||R||^2 = ||sum_j H_j^2|| and reproduces the generator as
    L(a) = R*(a (x) 1)R - (1/2){R*R, a}.
    """
    n = family.structure.ambient_dim
    if not family.H_list:
        return np.zeros((0, n), dtype=complex)
    return np.vstack([H.embed() for H in family.H_list])


def sum_of_squares(family):
    """sum_j H_j^2 as an AlgebraElement (a nonpositive element)."""
    acc = blockalg.zero(family.structure)
    for H in family.H_list:
        acc = acc + H @ H
    return acc


def normalize_central(family):
    """Subtract the central component of every H_j; the generator is
    unchanged because central shifts vanish in commutators."""
    out = []
    for H in family.H_list:
        out.append(H - blockalg.center_project(H).embed())
    return DerivationFamily(family.structure, tuple(out))


def random_family(structure, seed, J_max=4, scale=1.0):
    """Seeded random family with 1..J_max members."""
    rng = np.random.default_rng(seed)
    J = int(rng.integers(1, J_max + 1))
    members = []
    for j in range(J):
        H = blockalg.random_antiselfadjoint(structure, seed=(seed, j))
        members.append(scale * H)
    return DerivationFamily(structure, tuple(members))
