import numpy as np
import pytest

from qdsym import blockalg
from qdsym.blockalg import AlgebraElement, BlockStructure
from qdsym.derivgen import DerivationFamily, random_family
from qdsym.dilate import (DilationConfig, _expm_antiherm_batch,
                          compare_with_semigroup, simulate)


def dephasing():
    st = BlockStructure((2,))
    fam = DerivationFamily(st, (AlgebraElement(st, [1j * np.diag([1.0, -1.0])]),))
    x = AlgebraElement(st, [np.array([[0, 1], [0, 0]], complex)])
    return fam, x


def test_config_validation():
    with pytest.raises(ValueError):
        DilationConfig(0.0, 10, 10, 0)
    with pytest.raises(ValueError):
        DilationConfig(1.0, 0, 10, 0)
    with pytest.raises(ValueError):
        DilationConfig(1.0, 10, 10, 0, scheme="heun")
    cfg = DilationConfig(2.0, 10, 40, 0)
    assert cfg.dt == pytest.approx(0.05)


def test_expm_batch_against_scipy():
    import scipy.linalg
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 3, 3)) + 1j * rng.standard_normal((5, 3, 3))
    M = (X - X.conj().transpose(0, 2, 1)) / 2
    E = _expm_antiherm_batch(M)
    for i in range(5):
        assert np.abs(E[i] - scipy.linalg.expm(M[i])).max() < 1e-12
        assert np.abs(E[i].conj().T @ E[i] - np.eye(3)).max() < 1e-12


def test_dephasing_estimate_matches_closed_form():
    # E[e^{-2iB_t}] = e^{-2t} governs the off-diagonal decay
    fam, x = dephasing()
    cfg = DilationConfig(1.0, 4000, 200, seed=3)
    cmp_res = compare_with_semigroup(fam, x, cfg)
    assert cmp_res.exact.blocks[0][0, 1] == pytest.approx(np.exp(-2.0), abs=1e-12)
    assert cmp_res.max_z < 4.0
    assert cmp_res.estimate.unitarity_defect < 1e-10


def test_bitwise_reproducibility():
    fam, x = dephasing()
    cfg = DilationConfig(0.5, 500, 50, seed=11)
    e1 = simulate(fam, x, cfg)
    e2 = simulate(fam, x, cfg)
    for a, b in zip(e1.mean.blocks, e2.mean.blocks):
        assert (a == b).all()
    for a, b in zip(e1.std_error, e2.std_error):
        assert (a == b).all()


def test_chunking_does_not_change_the_estimate():
    # per-path seeding makes the estimate independent of chunk boundaries
    import qdsym.dilate as dl
    fam, x = dephasing()
    cfg = DilationConfig(0.5, 300, 30, seed=4)
    e1 = simulate(fam, x, cfg)
    old = dl._CHUNK
    try:
        dl._CHUNK = 37
        e2 = simulate(fam, x, cfg)
    finally:
        dl._CHUNK = old
    for a, b in zip(e1.mean.blocks, e2.mean.blocks):
        assert np.abs(a - b).max() < 1e-13


def test_empty_family_is_static():
    st = BlockStructure((2, 2))
    fam = DerivationFamily(st, ())
    x = blockalg.random_element(st, seed=5)
    est = simulate(fam, x, DilationConfig(1.0, 10, 10, 0))
    for a, b in zip(est.mean.blocks, x.blocks):
        assert (a == b).all()
    assert est.unitarity_defect == 0.0


def test_multiblock_family_against_semigroup():
    st = BlockStructure((2, 2), (1.0, 2.0))
    fam = random_family(st, seed=6, J_max=2, scale=0.5)
    x = blockalg.random_selfadjoint(st, seed=7)
    cfg = DilationConfig(0.5, 3000, 150, seed=8)
    cmp_res = compare_with_semigroup(fam, x, cfg)
    assert cmp_res.max_z < 5.0


def test_euler_maruyama_bias_decreases_with_steps():
    # common random numbers: the exactly-unitary scheme on the same Brownian
    # increments serves as the noise-free reference, so the remaining
    # difference is the time-discretization bias O(dt)
    fam, x = dephasing()
    diffs = []
    for n_steps in (10, 100, 1000):
        em = simulate(fam, x, DilationConfig(1.0, 2000, n_steps, seed=9,
                                             scheme="euler-maruyama"))
        ui = simulate(fam, x, DilationConfig(1.0, 2000, n_steps, seed=9,
                                             scheme="unitary-increment"))
        diffs.append(max(np.abs(a - b).max()
                         for a, b in zip(em.mean.blocks, ui.mean.blocks)))
    assert diffs[1] < diffs[0] and diffs[2] < diffs[0] / 5.0


def test_unitary_increment_scheme_is_exactly_unitary():
    fam, x = dephasing()
    cfg = DilationConfig(1.0, 200, 50, seed=10)
    est = simulate(fam, x, cfg)
    assert est.unitarity_defect < 1e-11
