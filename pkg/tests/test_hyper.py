import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asgdlab import (InfeasibleError, ValidationError, bound_constants,
                     compute_cutoffs, derive_classical, derive_from_alpha,
                     derive_overparam, derive_shb, make_spectrum)
from asgdlab.hyper import u22_values
from asgdlab.spectrum import Spectrum, tail_sum
from asgdlab.verify import sample_overparam


def test_paper_parameters(paper_spectrum, paper_hp):
    hp = paper_hp
    assert hp.beta == pytest.approx(1.0 / 79.0, rel=1e-14)
    assert hp.gamma == pytest.approx(79.0 / 150.0, rel=1e-13)
    assert hp.c == pytest.approx(0.975, rel=1e-14)
    assert hp.q == pytest.approx(79.0 / 750.0, rel=1e-14)


def test_overparam_matches_alpha_route(paper_spectrum, paper_hp):
    hp2 = derive_overparam(0.1, paper_hp.gamma, 5, 3.0, paper_spectrum)
    assert hp2.alpha == pytest.approx(0.9875, rel=1e-14)
    assert hp2.c == pytest.approx(paper_hp.c, rel=1e-14)


def test_sgd_specialization_has_q_equal_delta(paper_spectrum):
    hp = derive_overparam(0.1, 0.1, 5, 3.0, paper_spectrum)
    assert hp.q == pytest.approx(0.1, rel=1e-14)


def test_overparam_rejects_large_delta(paper_spectrum):
    bad = 1.0 / (2.0 * 3.0 * paper_spectrum.trace()) * 1.01
    with pytest.raises(ValidationError, match="delta"):
        derive_overparam(bad, 0.5, 5, 3.0, paper_spectrum)


def test_overparam_rejects_gamma_below_delta(paper_spectrum):
    with pytest.raises(ValidationError, match="gamma"):
        derive_overparam(0.1, 0.05, 5, 3.0, paper_spectrum)


def test_overparam_rejects_gamma_above_cap(paper_spectrum):
    cap = 1.0 / (2.0 * 3.0 * tail_sum(paper_spectrum, 5))
    with pytest.raises(ValidationError, match="gamma"):
        derive_overparam(0.1, cap * 1.01, 5, 3.0, paper_spectrum)


def test_from_alpha_small_alpha_surfaces_gamma_error(paper_spectrum):
    # alpha near 1/2 makes beta near 1, hence gamma < delta
    with pytest.raises(ValidationError, match="gamma"):
        derive_from_alpha(0.1, 0.51, 5, 3.0, paper_spectrum)


def test_from_alpha_requires_open_interval(paper_spectrum):
    with pytest.raises(ValidationError, match="alpha"):
        derive_from_alpha(0.1, 0.5, 5, 3.0, paper_spectrum)


def test_classical_hand_values():
    s = make_spectrum("custom", 2, values=[1.0, 1.0])
    hp = derive_classical(s, 3.0)
    assert hp.delta == pytest.approx(1.0 / 12.0, rel=1e-14)
    assert hp.gamma == pytest.approx(1.0 / 6.0, rel=1e-14)
    assert hp.beta == pytest.approx(1.0 / 12.0, rel=1e-14)
    assert hp.regime == "classical"


def test_classical_gamma_mu_is_two_beta():
    s = make_spectrum("custom", 1, values=[1.0])
    hp = derive_classical(s, 3.0)
    mu = s.eigenvalues[-1]
    assert hp.gamma * mu == pytest.approx(2.0 * hp.beta, rel=1e-14)


def test_classical_r_is_four():
    s = make_spectrum("polynomial", 10, exponent=2.0)
    hp = derive_classical(s, 3.0)
    bc = bound_constants(s, hp)
    assert 3.0 * bc.l < 1.0
    assert bc.r == pytest.approx(4.0, rel=1e-12)


def test_shb_derivation():
    s = make_spectrum("custom", 2, values=[1.0, 0.5])
    hp = derive_shb(0.9, 0.1, s, 3.0, 100)
    assert hp.delta == 0.0
    assert hp.q == pytest.approx(0.005, rel=1e-14)
    assert hp.regime == "shb"
    # boundary c accepted, open gamma interval enforced
    derive_shb(1.0 - 2.0 / 100, 0.1, s, 3.0, 100)
    with pytest.raises(ValidationError):
        derive_shb(1.0 - 2.0 / 100 + 1e-9, 0.1, s, 3.0, 100)
    with pytest.raises(ValidationError):
        derive_shb(0.9, 4.0 / (3.0 * s.trace()), s, 3.0, 100)


def test_paper_cutoffs(paper_spectrum, paper_hp):
    cuts = compute_cutoffs(paper_spectrum, paper_hp, 500)
    assert (cuts.k_ddagger, cuts.k_hat, cuts.k_dagger) == (0, 2, 6)
    assert cuts.k_star == 17
    assert cuts.k_star_sgd == 7


def test_cutoffs_empty_set_convention(paper_hp):
    tiny = make_spectrum("custom", 3, values=[1e-9, 1e-10, 1e-11])
    cuts = compute_cutoffs(tiny, paper_hp, 2)
    assert (cuts.k_ddagger, cuts.k_hat, cuts.k_dagger, cuts.k_star,
            cuts.k_star_sgd) == (0, 0, 0, 0, 0)


def test_cutoffs_shb_pins_large_and_hat_to_zero():
    s = make_spectrum("polynomial", 50, exponent=2.0)
    hp = derive_shb(0.9, 0.3, s, 3.0, 100)
    cuts = compute_cutoffs(s, hp, 100)
    assert cuts.k_ddagger == 0 and cuts.k_hat == 0


def test_cutoff_ordering_randomized():
    rng = np.random.default_rng(11)
    for _ in range(300):
        sp, hp = sample_overparam(rng, d_max=30)
        N = int(math.ceil(2.0 / (1.0 - hp.c))) + 5
        cuts = compute_cutoffs(sp, hp, N)
        assert cuts.k_ddagger <= cuts.k_hat <= cuts.k_dagger <= cuts.k_star


def test_bound_constants_paper(paper_spectrum, paper_hp):
    bc = bound_constants(paper_spectrum, paper_hp)
    # independent recomputation of l's three terms
    tr = sum(i ** -2.0 for i in range(1, 2001))
    tail5 = sum(i ** -2.0 for i in range(6, 2001))
    l_direct = 0.1 * tr / 2.0 + 1.0 / 6.0 + paper_hp.gamma / 4.0 * tail5
    assert bc.l == pytest.approx(l_direct, rel=1e-12)
    assert bc.r == pytest.approx(1.0 / (1.0 - 3.0 * l_direct), rel=1e-10)
    assert 0.272 < bc.l < 0.274
    assert 5.4 < bc.r < 5.6


def test_bound_constants_infeasible():
    from asgdlab.hyper import HyperParams, manual_params

    s = make_spectrum("custom", 2, values=[1.0, 1.0])
    # raw parameters violating the series condition: fatal in the
    # overparameterized regime, infinity-valued r in the manual one
    hp_over = HyperParams(0.9, 1.0 / 9.0 + 1e-3, 0.9, 0.4, 3.0, 1, "overparam")
    with pytest.raises(InfeasibleError):
        bound_constants(s, hp_over)
    hp_manual = manual_params(0.9, 1.0 / 9.0 + 1e-3, 0.9, 0.4, 3.0, 1)
    assert math.isinf(bound_constants(s, hp_manual).r)


def test_u22_bounds_randomized():
    rng = np.random.default_rng(12)
    for _ in range(200):
        sp, hp = sample_overparam(rng, d_max=25)
        lam = sp.eigenvalues
        u22 = u22_values(sp, hp)
        cap1 = hp.delta / 2.0 + 1.0 / (2.0 * hp.psi * hp.kappa_tilde * lam)
        cap2 = hp.delta / 2.0 + hp.gamma / 4.0
        assert np.all(u22 <= cap1 * (1 + 1e-12))
        assert np.all(u22 <= cap2 * (1 + 1e-12))
        bc = bound_constants(sp, hp)
        assert math.fsum(lam * u22) <= bc.l * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-4, 1.0 - 1e-4))
def test_qc_identities_from_beta(beta):
    # any beta in (0,1) with the tied alpha; gamma/delta from a fixed ratio
    s = make_spectrum("custom", 3, values=[1.0, 0.5, 0.25])
    from asgdlab.hyper import manual_params

    alpha = 1.0 / (1.0 + beta)
    delta = 0.05
    gamma = 0.3
    hp = manual_params(alpha, beta, gamma, delta, 3.0, 1)
    assert hp.c == pytest.approx(2.0 * alpha - 1.0, abs=1e-14)
    lhs = (hp.q - hp.c * delta) / (1.0 - hp.c)
    assert lhs == pytest.approx((gamma + delta) / 2.0, rel=1e-13)
    assert beta <= (1.0 - hp.c) * (1 + 1e-12) <= 2.0 * beta * (1 + 1e-12)
