import math

import numpy as np
import pytest

from asgdlab import ValidationError, block, decay_rate, eigenpair, partial_sum_vec, power_closed
from asgdlab.blockdyn import COMPLEX, REAL_LARGE, REAL_SMALL
from asgdlab.hyper import complex_window
from asgdlab.verify import sample_overparam


def test_block_entries(paper_hp):
    m0 = block(0.0, paper_hp).m
    np.testing.assert_allclose(m0, [[0.0, 1.0], [-paper_hp.c, 1.0 + paper_hp.c]], rtol=0)
    m1 = block(1.0, paper_hp).m
    np.testing.assert_allclose(
        m1, [[0.0, 0.9], [-0.975, 1.975 - 79.0 / 750.0]], rtol=1e-13)


def test_block_shb_form():
    from asgdlab import derive_shb, make_spectrum

    s = make_spectrum("custom", 2, values=[1.0, 0.5])
    hp = derive_shb(0.9, 0.1, s, 3.0, 100)
    m = block(1.0, hp).m
    np.testing.assert_allclose(m, [[0.0, 1.0], [-hp.c, 1.0 + hp.c - hp.q]], rtol=1e-14)


def test_eigenpair_lambda_zero(paper_hp):
    pair = eigenpair(0.0, paper_hp)
    assert pair.x2 == pytest.approx(1.0, rel=1e-14)
    assert pair.x1 == pytest.approx(paper_hp.c, rel=1e-14)


def test_eigenpair_paper_values(paper_hp):
    pair1 = eigenpair(1.0, paper_hp)
    assert pair1.regime == COMPLEX
    assert abs(pair1.x2) == pytest.approx(math.sqrt(0.975 * 0.9), rel=1e-13)
    pair7 = eigenpair(1.0 / 49.0, paper_hp)
    assert pair7.regime == REAL_SMALL
    lo = 1.0 - (paper_hp.gamma + paper_hp.delta) / 49.0
    hi = 1.0 - (paper_hp.gamma + paper_hp.delta) / 98.0
    assert lo <= pair7.x2.real <= hi


def test_eigenpair_complex_iff_negative_discriminant():
    rng = np.random.default_rng(21)
    for _ in range(300):
        sp, hp = sample_overparam(rng, d_max=10)
        lam = float(rng.uniform(1e-4, 1.0) * sp.eigenvalues[0])
        pair = eigenpair(lam, hp)
        assert (pair.regime == COMPLEX) == (pair.discriminant < 0)
        if pair.regime != COMPLEX:
            assert pair.x1.imag == 0 and pair.x2.imag == 0
            assert pair.x1.real <= pair.x2.real


def test_power_closed_base_case(paper_hp):
    np.testing.assert_allclose(power_closed(0.3, paper_hp, 1), block(0.3, paper_hp).m,
                               atol=1e-14)


def test_power_closed_matches_matrix_power(paper_hp):
    m = block(1.0, paper_hp).m
    assert np.max(np.abs(np.linalg.matrix_power(m, 10)
                         - power_closed(1.0, paper_hp, 10))) < 1e-9


def test_power_closed_rejects_k0(paper_hp):
    with pytest.raises(ValidationError):
        power_closed(1.0, paper_hp, 0)


def test_power_closed_degenerate_root(paper_hp):
    # lambda exactly at the upper complex-window edge gives a double root
    lam = complex_window(paper_hp)[1]
    pair = eigenpair(lam, paper_hp)
    assert abs(pair.x2 - pair.x1) < 1e-6
    m = block(lam, paper_hp).m
    for k in (3, 17, 64):
        brute = np.linalg.matrix_power(m, k)
        assert np.max(np.abs(brute - power_closed(lam, paper_hp, k))) < 1e-9


def test_partial_sum_single_term(paper_hp):
    np.testing.assert_allclose(partial_sum_vec(0.5, paper_hp, 0, 1, "ones"),
                               [1.0, 1.0], atol=1e-12)


def test_partial_sum_matches_direct(paper_hp):
    v = {"deltaq": np.array([paper_hp.delta, paper_hp.q]), "ones": np.ones(2)}
    for lam in (1.0, 0.25, 1.0 / 49.0, 1e-3):
        for name, vec in v.items():
            direct = np.zeros(2)
            m = block(lam, paper_hp).m
            p = np.linalg.matrix_power(m, 2)
            for _ in range(7):
                direct = direct + p @ vec
                p = p @ m
            got = partial_sum_vec(lam, paper_hp, 2, 7, name)
            assert np.max(np.abs(direct - got)) < 1e-10


def test_partial_sum_small_lambda_bracket(paper_hp):
    lam = 1.0 / 49.0
    rho = (paper_hp.q - paper_hp.c * paper_hp.delta) / (1.0 - paper_hp.c)
    val = partial_sum_vec(lam, paper_hp, 0, 500, "deltaq")[0]
    cap = 3.0 / lam * (1.0 - (1.0 - 2.0 * rho * lam) ** 500)
    assert 0.0 <= val <= cap


def test_partial_sum_validation(paper_hp):
    with pytest.raises(ValidationError):
        partial_sum_vec(1.0, paper_hp, -1, 5)
    with pytest.raises(ValidationError):
        partial_sum_vec(1.0, paper_hp, 0, 0)
    with pytest.raises(ValidationError):
        partial_sum_vec(0.0, paper_hp, 0, 5)
    with pytest.raises(ValidationError):
        partial_sum_vec(1.0, paper_hp, 0, 5, "bad")


def test_decay_rate_values(paper_hp):
    assert decay_rate(1.0 / 49.0, paper_hp) == pytest.approx(0.99360544, abs=5e-9)
    assert decay_rate(1.0, paper_hp) == pytest.approx(math.sqrt(0.975 * 0.9), rel=1e-12)
    assert 1.0 - 0.1 / 49.0 == pytest.approx(0.99795918, abs=5e-9)


def test_decay_rate_real_large_regime():
    rng = np.random.default_rng(22)
    for _ in range(50):
        sp, hp = sample_overparam(rng, d_max=10)
        hi = complex_window(hp)[1]
        if hi > sp.eigenvalues[0]:
            continue
        lam = float(rng.uniform(hi, sp.eigenvalues[0] * (1 + 1e-9)))
        assert decay_rate(lam, hp) == pytest.approx(hp.c * hp.delta / hp.q, rel=1e-12)


def test_stability_under_valid_parameters():
    rng = np.random.default_rng(23)
    for _ in range(300):
        sp, hp = sample_overparam(rng, d_max=20)
        lam = float(rng.uniform(1e-6, 1.0) * sp.eigenvalues[0])
        assert abs(eigenpair(lam, hp).x2) < 1.0
