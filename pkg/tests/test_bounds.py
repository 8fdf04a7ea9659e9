import math

import numpy as np
import pytest

from asgdlab import (InfeasibleError, ProblemInstance, ValidationError,
                     asgd_bound, classical_bound, compare_report, derive_classical,
                     derive_overparam, derive_shb, make_spectrum, onehot_bound,
                     sgd_bound, shb_bound, variance_scaling)
from asgdlab.hyper import bound_constants, compute_cutoffs, manual_params
from asgdlab.verify import sample_problem


def _independent_asgd_bound(inst, hp, s, N):
    """Appendix-variant evaluator written from scratch with plain loops."""
    lam = [float(x) for x in inst.spectrum.eigenvalues]
    v = [float(a - b) for a, b in zip(inst.w0, inst.w_star)]
    d = len(lam)
    c, q, dl, g, psi = hp.c, hp.q, hp.delta, hp.gamma, hp.psi
    rho = (q - c * dl) / (1.0 - c)
    thr_hi = (math.sqrt(q - c * dl) + math.sqrt(c * (q - dl))) ** 2 / q ** 2
    thr_lo = (math.sqrt(q - c * dl) - math.sqrt(c * (q - dl))) ** 2 / q ** 2
    kdd = sum(1 for x in lam if x >= thr_hi)
    khat = sum(1 for x in lam if x >= (1.0 - c) / dl)
    kd = sum(1 for x in lam if x > thr_lo)
    ks = sum(1 for x in lam if x >= 1.0 / ((g + dl) * N))
    tr = sum(lam)
    kt = hp.kappa_tilde
    l = dl * tr / 2.0 + 1.0 / (2.0 * psi) + g / 4.0 * sum(lam[kt:])
    r = 1.0 / (1.0 - psi * l)

    eb = 0.0
    for i in range(d):
        li, vi2 = lam[i], v[i] ** 2
        idx = i + 1
        if idx <= kdd:
            eb += 8.0 * (c * dl / q) ** (2 * s) / (N ** 2 * dl ** 2) * vi2 / li
        elif idx <= kd:
            shrink = (1.0 - dl * li) ** s
            eb += 4.0 * s ** 2 / N ** 2 * c ** s * li * shrink * vi2
            if idx <= khat:
                eb += 16.0 * c ** s / (N ** 2 * dl ** 2) * shrink * vi2 / li
            else:
                eb += 100.0 * c ** s / (N ** 2 * (1 - c) ** 2) * li * shrink * vi2
        elif idx <= ks:
            eb += (9.0 * (1 - c) ** 2 / (2.0 * N ** 2 * (q - c * dl) ** 2)
                   * (1.0 - rho * li) ** (2 * s) * vi2 / li)
        else:
            eb += 18.0 * li * (1.0 - rho * li) ** (2 * s) * vi2

    tail2 = sum(x * x for x in lam[ks:])
    sig2 = inst.noise_variance
    ev = sig2 * r * (27.0 * ks / (2.0 * N) + 18.0 * (s + N) * rho ** 2 * tail2)
    norms = (14.0 / dl * sum(x ** 2 for x in v[:khat])
             + 10.0 / (1 - c) * sum(lam[i] * v[i] ** 2 for i in range(khat, kd))
             + (1 - c) / (q - c * dl) * sum(x ** 2 for x in v[kd:ks])
             + 4.0 * (s + N) * sum(lam[i] * v[i] ** 2 for i in range(ks, d)))
    ev += psi * r / N * (9.0 * ks / N + 36.0 * N * rho ** 2 * tail2) * norms
    return eb, ev, 2.0 * (eb + ev)


def test_asgd_bound_zero_instance(paper_spectrum, paper_hp):
    d = paper_spectrum.d
    inst = ProblemInstance(paper_spectrum, np.zeros(d), np.zeros(d), 0.0, 3.0)
    rep = asgd_bound(inst, paper_hp, 100, 500)
    assert rep.effective_bias == 0.0 and rep.effective_variance == 0.0
    assert rep.total == 0.0


def test_asgd_bound_matches_independent(paper_inst_e20, paper_hp):
    rep = asgd_bound(paper_inst_e20, paper_hp, 500, 500, variant="appendix")
    eb, ev, total = _independent_asgd_bound(paper_inst_e20, paper_hp, 500, 500)
    assert rep.effective_bias == pytest.approx(eb, rel=1e-12)
    assert rep.effective_variance == pytest.approx(ev, rel=1e-12)
    assert rep.total == pytest.approx(total, rel=1e-12)
    assert rep.total > 0


def test_asgd_bound_matches_independent_randomized():
    rng = np.random.default_rng(31)
    for _ in range(25):
        inst, hp, s, N = sample_problem(rng, d_max=40)
        rep = asgd_bound(inst, hp, s, N, variant="appendix")
        eb, ev, total = _independent_asgd_bound(inst, hp, s, N)
        assert rep.effective_bias == pytest.approx(eb, rel=1e-10)
        assert rep.effective_variance == pytest.approx(ev, rel=1e-10)


def test_variance_leading_term(paper_inst_e20, paper_spectrum, paper_hp):
    rep = asgd_bound(paper_inst_e20, paper_hp, 500, 500)
    bc = bound_constants(paper_spectrum, paper_hp)
    lead = 0.01 * bc.r * 27.0 * 17.0 / (2.0 * 500.0)
    assert rep.per_segment["var_noise:0:k_star"] == pytest.approx(lead, rel=1e-12)
    assert lead == pytest.approx(0.0252, abs=5e-4)


def test_report_invariants_randomized():
    rng = np.random.default_rng(32)
    for _ in range(20):
        inst, hp, s, N = sample_problem(rng, d_max=30)
        for variant in ("main", "appendix"):
            rep = asgd_bound(inst, hp, s, N, variant=variant)
            assert rep.total == pytest.approx(
                rep.aggregation * (rep.effective_bias + rep.effective_variance), rel=1e-12)
            assert all(val >= 0.0 for val in rep.per_segment.values())


def test_variant_bias_terms_coincide():
    # every effective-bias coefficient coincides across the two variants
    rng = np.random.default_rng(33)
    for _ in range(20):
        inst, hp, s, N = sample_problem(rng, d_max=30)
        a = asgd_bound(inst, hp, s, N, variant="appendix")
        m = asgd_bound(inst, hp, s, N, variant="main")
        if a.effective_bias > 0:
            assert a.effective_bias == pytest.approx(m.effective_bias, rel=1e-12)
        assert m.effective_variance >= a.effective_variance * (1 - 1e-12)


def test_variants_agree_at_sgd_reduction(paper_spectrum):
    hp = derive_overparam(0.1, 0.1, 5, 3.0, paper_spectrum)
    d = paper_spectrum.d
    w0 = np.zeros(d)
    w0[6] = 10.0
    inst = ProblemInstance(paper_spectrum, np.zeros(d), w0, 0.01, 3.0)
    a = asgd_bound(inst, hp, 100, 500, variant="appendix")
    m = asgd_bound(inst, hp, 100, 500, variant="main")
    assert a.total == pytest.approx(m.total, rel=1e-12)


def test_asgd_bound_precondition(paper_spectrum, paper_hp):
    d = paper_spectrum.d
    inst = ProblemInstance(paper_spectrum, np.zeros(d), np.zeros(d), 0.01, 3.0)
    with pytest.raises(ValidationError, match="N"):
        asgd_bound(inst, paper_hp, 10, 10)  # N*(1-c) = 0.25 < 2


def test_sgd_bound_values(paper_spectrum):
    d = paper_spectrum.d
    inst0 = ProblemInstance(paper_spectrum, np.zeros(d), np.zeros(d), 0.0, 3.0)
    assert sgd_bound(inst0, 0.1, 3.0, 100, 500).total == 0.0
    w0 = np.zeros(d)
    w0[6] = 10.0
    inst = ProblemInstance(paper_spectrum, np.zeros(d), w0, 0.01, 3.0)
    rep = sgd_bound(inst, 0.1, 3.0, 500, 500)
    assert rep.cutoffs_used.k_star == 7
    lam7 = 7.0 ** -2.0
    expected_head = (1.0 / (0.01 * 500 ** 2)) * (1 - 0.1 * lam7) ** 1000 * 100.0 / lam7
    assert rep.per_segment["bias:0:k_star_sgd"] == pytest.approx(expected_head, rel=1e-12)


def test_sgd_bound_infeasible():
    s = make_spectrum("custom", 2, values=[1.0, 1.0])
    inst = ProblemInstance(s, np.zeros(2), np.zeros(2), 0.01, 3.0)
    with pytest.raises(InfeasibleError):
        sgd_bound(inst, 0.2, 3.0, 10, 100)


def _independent_shb_bound(inst, hp, s, N):
    lam = [float(x) for x in inst.spectrum.eigenvalues]
    v = [float(a - b) for a, b in zip(inst.w0, inst.w_star)]
    c, q, g, psi = hp.c, hp.q, hp.gamma, hp.psi
    thr_lo = (math.sqrt(q) - math.sqrt(c * q)) ** 2 / q ** 2
    kd = sum(1 for x in lam if x > thr_lo)
    ks = sum(1 for x in lam if x >= 1.0 / (g * N))
    r = 1.0 / (1.0 - psi * g * sum(lam) / 4.0)
    eb = (c ** s * (4.0 * s ** 2 + 100.0 / (1 - c) ** 2) / N ** 2
          * sum(lam[i] * v[i] ** 2 for i in range(kd)))
    eb += 18.0 / (N ** 2 * g ** 2) * sum(
        (1 - g * lam[i] / 2.0) ** (2 * s) * v[i] ** 2 / lam[i] for i in range(kd, ks))
    eb += 18.0 * sum((1 - g * lam[i] / 2.0) ** (2 * s) * lam[i] * v[i] ** 2
                     for i in range(ks, len(lam)))
    tail2 = sum(x * x for x in lam[ks:])
    tau = q / (1.0 - c)
    ev = inst.noise_variance * r * (27.0 * ks / (2.0 * N) + 18.0 * (s + N) * tau ** 2 * tail2)
    norms = (10.0 / (1 - c) * sum(lam[i] * v[i] ** 2 for i in range(kd))
             + 2.0 / g * sum(v[i] ** 2 for i in range(kd, ks))
             + 4.0 * (s + N) * sum(lam[i] * v[i] ** 2 for i in range(ks, len(lam))))
    ev += psi * r / N * (9.0 * ks / N + 36.0 * N * tau ** 2 * tail2) * norms
    return 2.0 * (eb + ev)


def test_shb_bound_pinned():
    s = make_spectrum("custom", 2, values=[1.0, 0.25])
    hp = derive_shb(0.9, 0.1, s, 3.0, 100)
    rng = np.random.default_rng(34)
    w0 = rng.normal(size=2)
    inst = ProblemInstance(s, np.zeros(2), w0, 0.3, 3.0)
    rep = shb_bound(inst, hp, 100, 100, variant="appendix")
    assert rep.total == pytest.approx(_independent_shb_bound(inst, hp, 100, 100), rel=1e-12)
    inst0 = ProblemInstance(s, w0, w0, 0.0, 3.0)
    assert shb_bound(inst0, hp, 100, 100).total == 0.0


def test_classical_zero_start_keeps_noise_terms():
    s = make_spectrum("custom", 2, values=[1.0, 1.0])
    inst = ProblemInstance(s, np.zeros(2), np.zeros(2), 1.0, 3.0)
    rep = classical_bound(inst, 3.0, 0, 100, variant="main")
    hp = derive_classical(s, 3.0)
    expected = 36.0 * 2.0 / 100.0 + 128.0 * 2.0 / (100 ** 2 * hp.beta)
    assert rep.effective_bias == 0.0
    assert rep.total == pytest.approx(expected, rel=1e-12)
    assert rep.aggregation == 1.0


def test_classical_hand_sum():
    s = make_spectrum("custom", 2, values=[1.0, 1.0])
    w0 = np.array([1.0, -1.0])
    inst = ProblemInstance(s, np.zeros(2), w0, 1.0, 3.0)
    hp = derive_classical(s, 3.0)
    loss_gap = 0.5 * 2.0
    d, N, s_ = 2, 100, 0
    expected = (100.0 / (N ** 2 * hp.beta ** 2) * loss_gap
                + 1008.0 * 3.0 * d / (N ** 2 * hp.beta) * loss_gap
                + 36.0 * d / N + 128.0 * d / (N ** 2 * hp.beta))
    rep = classical_bound(inst, 3.0, s_, N, variant="main")
    assert rep.total == pytest.approx(expected, rel=1e-12)


def test_classical_beta_through_condition_number():
    s = make_spectrum("polynomial", 10, exponent=2.0)
    hp = derive_classical(s, 3.0)
    kappa = s.trace() / s.eigenvalues[-1]
    assert hp.beta == pytest.approx(1.0 / (2.0 * 3.0 * math.sqrt(10 * kappa)), rel=1e-12)


def test_classical_exponential_chain():
    rng = np.random.default_rng(35)
    for _ in range(50):
        d = int(rng.integers(2, 20))
        lam = np.sort(rng.uniform(0.05, 1.0, d))[::-1]
        s = make_spectrum("custom", d, values=lam.tolist())
        hp = derive_classical(s, 3.0)
        c = hp.c
        step = int(rng.integers(1, 200))
        assert c ** (step / 2.0) <= math.exp(-(1 - c) * step / 2.0) * (1 + 1e-12)
        assert math.exp(-(1 - c) * step / 2.0) <= math.exp(-hp.beta * step / 2.0) * (1 + 1e-12)


def _independent_onehot_ev(inst, hp, s, N):
    lam = [float(x) for x in inst.spectrum.eigenvalues]
    v = [float(a - b) for a, b in zip(inst.w0, inst.w_star)]
    c, q, dl, g = hp.c, hp.q, hp.delta, hp.gamma
    u22 = [dl / 2.0 + (1 + c) * (q - dl) / (2 * (1 - c * c + c * x * (q + c * dl)))
           for x in lam]
    r = 1.0 / (1.0 - max(u22))
    thr_hi = (math.sqrt(q - c * dl) + math.sqrt(c * (q - dl))) ** 2 / q ** 2
    thr_lo = (math.sqrt(q - c * dl) - math.sqrt(c * (q - dl))) ** 2 / q ** 2
    khat = sum(1 for x in lam if x >= (1 - c) / dl)
    kd = sum(1 for x in lam if x > thr_lo)
    ks = sum(1 for x in lam if x >= 1.0 / ((g + dl) * N))
    tail2 = sum(x * x for x in lam[ks:])
    ev = inst.noise_variance * r * (27.0 * ks / (2 * N) + 18.0 * (s + N) * g ** 2 * tail2)
    ev += r / N ** 2 * (
        126.0 / dl * sum(v[i] ** 2 / lam[i] for i in range(khat))
        + 90.0 / (1 - c) * sum(v[i] ** 2 for i in range(khat, kd))
        + 18.0 / g * sum(v[i] ** 2 / lam[i] for i in range(kd, ks))
        + 36.0 * g ** 2 * N ** 2 * s * sum(lam[i] ** 2 * v[i] ** 2
                                           for i in range(ks, len(lam))))
    return ev


def test_onehot_bound_pinned():
    s = make_spectrum("custom", 3, values=[0.5, 0.3, 0.2])
    hp = manual_params(1.0 / 1.1, 0.1, 0.5, 0.25, 3.0, 1)
    w0 = np.array([0.4, -0.8, 1.1])
    inst = ProblemInstance(s, np.zeros(3), w0, 0.2, 3.0)
    rep = onehot_bound(inst, hp, 40, 80, variant="main")
    assert rep.effective_variance == pytest.approx(
        _independent_onehot_ev(inst, hp, 40, 80), rel=1e-12)
    bc = bound_constants(s, hp)
    assert bc.r_onehot <= 1.0 / (1.0 - hp.gamma / 2.0) * (1 + 1e-12)
    inst0 = ProblemInstance(s, w0, w0, 0.0, 3.0)
    assert onehot_bound(inst0, hp, 40, 80).total == 0.0


def test_onehot_parameter_ranges():
    s = make_spectrum("custom", 2, values=[0.5, 0.25])
    inst = ProblemInstance(s, np.zeros(2), np.zeros(2), 0.1, 3.0)
    with pytest.raises(ValidationError):
        onehot_bound(inst, manual_params(1 / 1.1, 0.1, 1.5, 0.2, 3.0, 1), 10, 100)
    with pytest.raises(ValidationError):
        onehot_bound(inst, manual_params(1 / 1.1, 0.1, 0.5, 0.6, 3.0, 1), 10, 100)


def test_compare_report_paper(paper_inst_e20, paper_hp):
    rep = compare_report(paper_inst_e20, paper_hp, 0.1, 500, 500, max_rows=12)
    assert rep.k_hat == 2
    flags = {row.index: row.winner for row in rep.rows}
    assert flags[1] == "sgd"
    assert flags[2] == "tie"
    assert all(flags[i] == "asgd" for i in range(3, 13))
    row7 = rep.rows[6]
    assert row7.asgd_base == pytest.approx(0.99360544, abs=5e-9)
    assert row7.sgd_base == pytest.approx(0.99795918, abs=5e-9)
    assert row7.asgd_base ** 2 == pytest.approx(0.9873, abs=5e-5)
    assert row7.sgd_base ** 2 == pytest.approx(0.996, abs=5e-4)


def test_compare_report_single_large_eigenvalue():
    # gamma large enough that lambda_1 sits above every cutoff (k_hat = 1)
    s = make_spectrum("custom", 1, values=[1.0])
    hp = derive_overparam(0.1, 5.0, 1, 3.0, s)
    inst = ProblemInstance(s, np.zeros(1), np.ones(1), 0.01, 3.0)
    rep = compare_report(inst, hp, 0.1, 10, 400)
    assert rep.k_hat == 1
    assert rep.rows[0].winner == "sgd"


def test_compare_flags_invariant_to_scaling(paper_spectrum, paper_hp):
    d = paper_spectrum.d
    flags = []
    for coef, noise in ((10.0, 0.01), (1e-3, 4.0)):
        w0 = np.zeros(d)
        w0[4] = coef
        inst = ProblemInstance(paper_spectrum, np.zeros(d), w0, noise, 3.0)
        rep = compare_report(inst, paper_hp, 0.1, 500, 500, max_rows=10)
        flags.append([r.winner for r in rep.rows])
    assert flags[0] == flags[1]


def test_variance_scaling_validates_grid(paper_spectrum):
    with pytest.raises(ValidationError):
        variance_scaling(paper_spectrum, 5, 3.0, [100, 1000])


def test_variance_scaling_polynomial_exponent():
    sp = make_spectrum("polynomial", 3000, exponent=2.0)
    fit = variance_scaling(sp, 5, 3.0, np.logspace(3, 5.5, 15).astype(int))
    assert fit.slope == pytest.approx(-0.5, abs=0.05)
