"""Monte Carlo dilation of derivation-built semigroups by classical noise.

The flow j_t(x) = U_t* x U_t with the random unitary satisfying

    dU_t = sum_j H_j U_t dB_j(t) + 1/2 (sum_j H_j^2) U_t dt

has, by the Ito rule, E[U_t* x U_t] governed by exactly the double
commutator generator 1/2 sum_j [H_j, [H_j, x]]: with dU = A U dB + G U dt,

    d(U* x U) = U*(A* x + x A) U dB + U*(G* x + x G + A* x A) U dt,

and A = H_j anti-self-adjoint, G = 1/2 sum_j H_j^2 gives drift
U* (1/2 sum_j [H_j,[H_j,x]]) U.  This derived identity is what
`compare_with_semigroup` validates against the exact matrix exponential.

Schemes: 'unitary-increment' applies exp(sum_j H_j dB_j) per step, which is
exactly unitary because the step matrix is anti-self-adjoint (the batched
exponential is a scaled-and-squared Taylor sum, unitary to truncation
error, far below the 1e-10 budget); 'euler-maruyama' is the drift-corrected
linear step, retained for convergence-order demonstrations only.

Reproducibility: path p draws from a Philox stream keyed by
SeedSequence(seed, spawn_key=(p,)), independent of chunking or execution
order; paths are processed in fixed-size chunks and reduced with numpy's
pairwise summation, so a given config yields bitwise-identical estimates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import blockalg, derivgen, superop
from .blockalg import AlgebraElement

SCHEMES = ("unitary-increment", "euler-maruyama")
_CHUNK = 4096


@dataclass(frozen=True)
class DilationConfig:
    t_final: float
    n_paths: int
    n_steps: int
    seed: int
    scheme: str = "unitary-increment"

    def __post_init__(self):
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")

    @property
    def dt(self):
        return self.t_final / self.n_steps


@dataclass
class DilationEstimate:
    mean: AlgebraElement
    std_error: list            # one nonnegative real array per block
    n_paths: int
    scheme: str
    unitarity_defect: float    # max over paths of ||U*U - 1|| at t_final


def _expm_antiherm_batch(M):
    """exp(M) for a batch (..., m, m) of anti-Hermitian matrices.

    Scaling and squaring with a degree-12 Taylor sum; the scaling keeps the
    norm below 1/4 so the truncation error is ~1e-18 per step.
    """
    nrm = np.abs(M).sum(axis=-1).max(axis=-1).max()
    s = 0
    if nrm > 0.25:
        s = int(np.ceil(np.log2(nrm / 0.25)))
        M = M / (2.0 ** s)
    m = M.shape[-1]
    eye = np.eye(m, dtype=complex)
    E = eye + M / 12.0
    for k in range(11, 0, -1):
        E = eye + (M @ E) / k
    for _ in range(s):
        E = E @ E
    return E


def _path_increments(seed, path_indices, n_steps, J, dt):
    """Gaussian increments dB ~ N(0, dt), shape (paths, n_steps, J)."""
    out = np.empty((len(path_indices), n_steps, J))
    root = np.sqrt(dt)
    for i, p in enumerate(path_indices):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(int(p),))
        gen = np.random.Generator(np.random.Philox(ss))
        out[i] = root * gen.standard_normal((n_steps, J))
    return out


def simulate(family, x, cfg):
    """Monte Carlo estimate of E[U_t* x U_t] under the random-unitary flow."""
    structure = family.structure
    if x.structure != structure:
        raise blockalg.StructureMismatchError("x on wrong structure")
    J = len(family.H_list)
    P = cfg.n_paths
    if J == 0:
        # empty family: U_t = 1 for every path
        se = [np.zeros(b.shape) for b in x.blocks]
        return DilationEstimate(x, se, P, cfg.scheme, 0.0)

    dt = cfg.dt
    H_stacks = []   # per block: (J, m, m)
    for k, m in enumerate(structure.dims):
        H_stacks.append(np.stack([H.blocks[k] for H in family.H_list]))
    drift = [0.5 * dt * np.sum(Hs @ Hs, axis=0) for Hs in H_stacks]

    values = [np.empty((P, m, m), dtype=complex) for m in structure.dims]
    defect = 0.0
    for lo in range(0, P, _CHUNK):
        hi = min(lo + _CHUNK, P)
        dB = _path_increments(cfg.seed, range(lo, hi), cfg.n_steps, J, dt)
        for k, m in enumerate(structure.dims):
            Hs = H_stacks[k]
            U = np.broadcast_to(np.eye(m, dtype=complex), (hi - lo, m, m)).copy()
            if cfg.scheme == "unitary-increment":
                for s in range(cfg.n_steps):
                    M = np.tensordot(dB[:, s, :], Hs, axes=(1, 0))
                    U = _expm_antiherm_batch(M) @ U
            else:
                eye = np.eye(m, dtype=complex)
                for s in range(cfg.n_steps):
                    M = np.tensordot(dB[:, s, :], Hs, axes=(1, 0))
                    U = (eye + M + drift[k]) @ U
            Uh = U.conj().transpose(0, 2, 1)
            values[k][lo:hi] = Uh @ x.blocks[k] @ U
            defect = max(defect, float(np.abs(Uh @ U - np.eye(m)).max()))

    mean = AlgebraElement(structure, [v.mean(axis=0) for v in values])
    if P > 1:
        se = [np.std(v, axis=0, ddof=1) / np.sqrt(P) for v in values]
    else:
        se = [np.zeros((m, m)) for m in structure.dims]
    return DilationEstimate(mean, se, P, cfg.scheme, defect)


@dataclass
class DilationComparison:
    estimate: DilationEstimate
    exact: AlgebraElement
    z_scores: list     # per block: |mean - exact| / std_error, nan where se=0
    max_z: float
    max_abs_error: float


def compare_with_semigroup(family, x, cfg):
    """Run the Monte Carlo flow and compare against exp(t L) applied to x."""
    est = simulate(family, x, cfg)
    L = derivgen.build(family)
    exact = superop.apply(superop.exp_semigroup(L, cfg.t_final), x)
    z_blocks = []
    max_z = 0.0
    max_err = 0.0
    for k in range(family.structure.n_blocks):
        err = np.abs(est.mean.blocks[k] - exact.blocks[k])
        max_err = max(max_err, float(err.max(initial=0.0)))
        se = est.std_error[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, err / np.where(se > 0, se, 1.0), np.nan)
        z_blocks.append(z)
        finite = z[np.isfinite(z)]
        if finite.size:
            max_z = max(max_z, float(finite.max()))
    return DilationComparison(est, exact, z_blocks, max_z, max_err)
