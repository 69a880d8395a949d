import numpy as np
import pytest

from qdsym import blockalg, superop
from qdsym.blockalg import AlgebraElement, BlockStructure, identity
from qdsym.derivgen import DerivationFamily, build
from qdsym.superop import (KernelSizeError, SuperOperator, apply, check_ccp,
                           check_conservative, check_cp_map, check_symmetric,
                           compose, dissipation, exp_semigroup, from_hamiltonian,
                           from_kraus, from_map, gkls, identity_map,
                           relation2_check, zero_map)


def dephasing():
    st = BlockStructure((2,))
    H = AlgebraElement(st, [1j * np.diag([1.0, -1.0])])
    return st, build(DerivationFamily(st, (H,)))


def markov():
    st = BlockStructure((1, 1))
    return st, SuperOperator(st, np.array([[-1.0, 1.0], [1.0, -1.0]]))


def test_from_map_apply_consistency():
    st = BlockStructure((2, 3), (2.0, 1.0))
    K = blockalg.random_element(st, seed=0)

    def fn(a):
        return K @ a + a @ K.adjoint()

    L = from_map(st, fn)
    for s in range(4):
        a = blockalg.random_element(st, seed=100 + s)
        assert (apply(L, a) - fn(a)).norm() < 1e-12


def test_from_hamiltonian_matches_commutator():
    st = BlockStructure((3, 2))
    A = blockalg.random_selfadjoint(st, seed=1)
    L = from_hamiltonian(A)
    Lref = from_map(st, lambda x: 1j * (A @ x - x @ A))
    assert np.abs(L.dense() - Lref.dense()).max() < 1e-12
    with pytest.raises(blockalg.ValidationError):
        from_hamiltonian(blockalg.random_element(st, seed=2))


def test_from_kraus_matches_direct():
    st = BlockStructure((2, 2))
    Rs = [blockalg.random_element(st, seed=s) for s in (3, 4)]
    psi = from_kraus(Rs)
    ref = from_map(st, lambda x: sum((R.adjoint() @ x @ R for R in Rs),
                                     blockalg.zero(st)))
    assert np.abs(psi.dense() - ref.dense()).max() < 1e-12


def test_gkls_assembly():
    st = BlockStructure((3,))
    Rs = [blockalg.random_element(st, seed=5)]
    k = blockalg.random_selfadjoint(st, seed=6)
    H = blockalg.random_selfadjoint(st, seed=7)
    L = gkls(Rs, k, H)
    ref = from_map(st, lambda x: (Rs[0].adjoint() @ x @ Rs[0] + k @ x + x @ k
                                  + 1j * (H @ x - x @ H)))
    assert np.abs(L.dense() - ref.dense()).max() < 1e-11


def test_superop_algebra():
    st = BlockStructure((2, 2))
    A = from_hamiltonian(blockalg.random_selfadjoint(st, seed=8))
    B = from_hamiltonian(blockalg.random_selfadjoint(st, seed=9))
    x = blockalg.random_element(st, seed=10)
    assert (apply(compose(A, B), x) - apply(A, apply(B, x))).norm() < 1e-12
    assert (apply(A + B, x) - apply(A, x) - apply(B, x)).norm() < 1e-12
    assert (apply(zero_map(st), x)).norm() == 0
    assert (apply(identity_map(st), x) - x).norm() < 1e-13


def test_dissipation_hand_oracle():
    # dephasing: partial(E12, E12) = L(E21 E12) - L(E21)E12 - E21 L(E12)
    #          = L(E22) + 2 E21 E12 + 2 E21 E12 = 0 + 4 E22
    st, L = dephasing()
    E12 = AlgebraElement(st, [np.array([[0, 1], [0, 0]], complex)])
    val = dissipation(L, E12, E12)
    expect = AlgebraElement(st, [np.diag([0.0, 4.0]).astype(complex)])
    assert (val - expect).norm() < 1e-12


def test_checks_on_dephasing():
    st, L = dephasing()
    assert check_conservative(L).passed
    assert check_symmetric(L).passed
    assert check_ccp(L).passed
    rep = relation2_check(L)
    assert rep.passed and rep.residual == 0.0  # factor: trivial centre


def test_symmetry_check_detects_violation():
    st = BlockStructure((2,))
    H = blockalg.random_selfadjoint(st, seed=11)
    L = from_hamiltonian(H)  # i[H,.] is anti-symmetric w.r.t. tau, not symmetric
    rep = check_symmetric(L)
    assert not rep.passed
    assert rep.witness is not None


def test_conservative_check_detects_violation():
    st = BlockStructure((2,))
    K = blockalg.random_selfadjoint(st, seed=12)
    L = from_map(st, lambda x: K @ x + x @ K)
    rep = check_conservative(L)
    assert not rep.passed
    assert (rep.witness - apply(L, identity(st))).norm() < 1e-13


def test_relation2_markov_residual_exactly_one():
    st, Q = markov()
    rep = relation2_check(Q)
    assert not rep.passed
    assert rep.residual == pytest.approx(1.0, abs=1e-12)
    assert rep.detail["projections"] == ("P_1", "P_2")


def test_relation2_passes_on_derivation_built_generators():
    from qdsym.derivgen import random_family
    for s in range(5):
        st = BlockStructure((2, 2, 1))
        L = build(random_family(st, seed=40 + s))
        rep = relation2_check(L)
        assert rep.passed, rep


def test_ccp_detects_non_ccp():
    # minus a dissipator is not conditionally completely positive
    st, L = dephasing()
    rep = check_ccp(-1.0 * L)
    assert not rep.passed
    assert rep.detail["lambda_min"] < -1e-3


def test_cp_map_transpose_negative_control():
    st = BlockStructure((2,))
    T = from_map(st, lambda x: AlgebraElement(st, [x.blocks[0].T]))
    rep = check_cp_map(T)
    assert not rep.passed
    st2, L = dephasing()
    assert check_cp_map(exp_semigroup(L, 0.3)).passed


def test_kernel_size_guard():
    st = BlockStructure((9,))
    L = zero_map(st)
    with pytest.raises(KernelSizeError):
        check_ccp(L, max_kernel_dim=100)
    with pytest.raises(KernelSizeError):
        check_cp_map(L, max_kernel_dim=100)


def test_semigroup_law_and_positivity_of_time():
    st, L = dephasing()
    t, s = 0.4, 0.9
    Tts = exp_semigroup(L, t + s)
    TtTs = compose(exp_semigroup(L, t), exp_semigroup(L, s))
    assert np.abs(Tts.dense() - TtTs.dense()).max() < 1e-12
    with pytest.raises(ValueError):
        exp_semigroup(L, -0.1)


def test_exp_semigroup_weight_invariance():
    from qdsym.derivgen import random_family
    dims = (2, 2)
    fam1 = random_family(BlockStructure(dims), seed=13)
    st2 = BlockStructure(dims, (2.0, 3.0))
    fam2 = DerivationFamily(st2, tuple(AlgebraElement(st2, H.blocks)
                                       for H in fam1.H_list))
    x1 = blockalg.random_element(fam1.structure, seed=14)
    x2 = AlgebraElement(st2, x1.blocks)
    y1 = apply(exp_semigroup(build(fam1), 0.7), x1)
    y2 = apply(exp_semigroup(build(fam2), 0.7), x2)
    assert max(np.abs(a - b).max() for a, b in zip(y1.blocks, y2.blocks)) < 1e-10


def test_symmetry_implies_trace_form():
    # tau(L(a) b) = tau(a L(b)) for derivation-built generators, random a, b
    from qdsym.derivgen import random_family
    st = BlockStructure((3, 2), (1.0, 2.0))
    L = build(random_family(st, seed=15))
    for s in range(4):
        a = blockalg.random_element(st, seed=200 + s)
        b = blockalg.random_element(st, seed=300 + s)
        lhs = blockalg.trace(apply(L, a) @ b)
        rhs = blockalg.trace(a @ apply(L, b))
        assert lhs == pytest.approx(rhs, abs=1e-10 * L.norm())


def test_sparse_assembly_matches_dense():
    # a single block above the sparse threshold goes through the sparse path
    st = BlockStructure((24,))
    H = blockalg.random_selfadjoint(st, seed=16)
    L = from_hamiltonian(H)
    Lref = from_map(st, lambda x: 1j * (H @ x - x @ H))
    assert np.abs(L.dense() - Lref.dense()).max() < 1e-10
