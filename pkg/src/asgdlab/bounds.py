"""Closed-form excess-risk bound evaluators and ASGD-vs-SGD comparison.

Every evaluator returns a ``BoundReport`` whose ``total`` is the certified
excess-risk upper bound.  For the tail-averaged family (accelerated, plain
SGD, heavy ball, one-hot) the decomposition is

    risk <= 2 * effective_bias + 2 * effective_variance,

while the classical strongly-convex display carries no factor 2
(``aggregation`` records which convention a report uses).

Two coefficient sets are available behind ``variant``:

* "appendix" (default) -- the tighter constants from the proofs, written in
  terms of (q - c*delta)/(1 - c);
* "main" -- the headline constants, written in terms of gamma and
  (gamma + delta)/2.

The two coincide term-for-term wherever (q - c*delta)/(1 - c) equals
(gamma + delta)/2 (an exact identity for the supported regimes); they differ
only in the variance tail terms, where the appendix uses (gamma + delta)/2
in place of gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blockdyn import decay_rate
from .errors import InfeasibleError, ValidationError
from .hyper import BoundConstants, Cutoffs, HyperParams, bound_constants, compute_cutoffs
from .spectrum import ProblemInstance, Spectrum, tail_sum_squares

__all__ = [
    "BoundReport", "CompareRow", "CompareReport", "ScalingFit",
    "asgd_bound", "sgd_bound", "shb_bound", "classical_bound", "onehot_bound",
    "compare_report", "variance_scaling",
]

VARIANTS = ("main", "appendix")

SEG_LARGE = "0:k_ddagger"
SEG_UPPER_MID = "k_ddagger:k_hat"
SEG_LOWER_MID = "k_hat:k_dagger"
SEG_SMALL = "k_dagger:k_star"
SEG_TAIL = "k_star:inf"


@dataclass(frozen=True)
class BoundReport:
    algorithm: str
    variant: str
    effective_bias: float
    effective_variance: float
    total: float
    per_segment: dict
    constants_used: BoundConstants | None
    cutoffs_used: Cutoffs | None
    aggregation: float = 2.0
    provenance: str = "bound"


def _wsum(terms: np.ndarray, lo: int, hi: int) -> float:
    """Compensated sum of terms over the (lo, hi] index segment (0-based slice)."""
    if lo >= hi:
        return 0.0
    return math.fsum(terms[lo:hi])


def _tail_coef(hp: HyperParams, variant: str) -> float:
    """The stepsize entering the variance tail terms: gamma or (q-c*delta)/(1-c)."""
    if variant == "main":
        return hp.gamma
    return (hp.q - hp.c * hp.delta) / (1.0 - hp.c)


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")


def _asgd_effective_bias(inst: ProblemInstance, hp: HyperParams, cuts: Cutoffs,
                         s: int, N: int, variant: str) -> tuple[float, dict]:
    lam = inst.spectrum.eigenvalues
    v2 = inst.shift() ** 2
    c, q, delta, gamma = hp.c, hp.q, hp.delta, hp.gamma
    kdd, khat, kd, ks = cuts.k_ddagger, cuts.k_hat, cuts.k_dagger, cuts.k_star

    if variant == "main":
        rho = (gamma + delta) / 2.0
        coef_small = 18.0 / (N ** 2 * (gamma + delta) ** 2)
    else:
        rho = (q - c * delta) / (1.0 - c)
        coef_small = 9.0 * (1.0 - c) ** 2 / (2.0 * N ** 2 * (q - c * delta) ** 2)

    cd_pow = (c * delta / q) ** (2 * s)
    cs = c ** s
    shrink = (1.0 - delta * lam) ** s
    shrink_small = (1.0 - rho * lam) ** (2 * s)

    t_large = 8.0 * cd_pow / (N ** 2 * delta ** 2) * _wsum(v2 / lam, 0, kdd) if delta > 0 else 0.0
    osc = 4.0 * s ** 2 / N ** 2 * cs
    t_osc_up = osc * _wsum(lam * shrink * v2, kdd, khat)
    t_osc_low = osc * _wsum(lam * shrink * v2, khat, kd)
    t_mid_up = (16.0 * cs / (N ** 2 * delta ** 2) * _wsum(shrink * v2 / lam, kdd, khat)
                if delta > 0 else 0.0)
    t_mid_low = 100.0 * cs / (N ** 2 * (1.0 - c) ** 2) * _wsum(lam * shrink * v2, khat, kd)
    t_small = coef_small * _wsum(shrink_small * v2 / lam, kd, ks)
    t_tail = 18.0 * _wsum(lam * shrink_small * v2, ks, inst.d)

    segments = {
        f"bias:{SEG_LARGE}": t_large,
        f"bias:{SEG_UPPER_MID}": t_osc_up + t_mid_up,
        f"bias:{SEG_LOWER_MID}": t_osc_low + t_mid_low,
        f"bias:{SEG_SMALL}": t_small,
        f"bias:{SEG_TAIL}": t_tail,
    }
    eb = math.fsum([t_large, t_osc_up, t_osc_low, t_mid_up, t_mid_low, t_small, t_tail])
    return eb, segments


def _asgd_effective_variance(inst: ProblemInstance, hp: HyperParams, cuts: Cutoffs,
                             r: float, s: int, N: int, variant: str) -> tuple[float, dict]:
    lam = inst.spectrum.eigenvalues
    v2 = inst.shift() ** 2
    c, q, delta, gamma = hp.c, hp.q, hp.delta, hp.gamma
    khat, kd, ks = cuts.k_hat, cuts.k_dagger, cuts.k_star
    tau = _tail_coef(hp, variant)
    tail2 = tail_sum_squares(inst.spectrum, ks)
    sigma2 = inst.noise_variance

    noise = sigma2 * r * (27.0 * ks / (2.0 * N) + 18.0 * (s + N) * tau ** 2 * tail2)

    kappa_b = 2.0 / (gamma + delta) if variant == "main" else (1.0 - c) / (q - c * delta)
    norms = {
        f"var_init:0:k_hat": 14.0 / delta * _wsum(v2, 0, khat) if delta > 0 else 0.0,
        f"var_init:{SEG_LOWER_MID}": 10.0 / (1.0 - c) * _wsum(lam * v2, khat, kd),
        f"var_init:{SEG_SMALL}": kappa_b * _wsum(v2, kd, ks),
        f"var_init:{SEG_TAIL}": 4.0 * (s + N) * _wsum(lam * v2, ks, inst.d),
    }
    bracket = 9.0 * ks / N + 36.0 * N * tau ** 2 * tail2
    init = hp.psi * r / N * bracket * math.fsum(norms.values())

    segments = {"var_noise:0:k_star": sigma2 * r * 27.0 * ks / (2.0 * N),
                f"var_noise:{SEG_TAIL}": sigma2 * r * 18.0 * (s + N) * tau ** 2 * tail2}
    scale = hp.psi * r / N * bracket
    segments.update({k: scale * val for k, val in norms.items()})
    return noise + init, segments


def asgd_bound(inst: ProblemInstance, hp: HyperParams, s: int, N: int,
               variant: str = "appendix") -> BoundReport:
    """Instance-dependent excess-risk bound for tail-averaged accelerated SGD."""
    _check_variant(variant)
    if hp.regime not in ("overparam", "classical"):
        raise ValidationError(f"asgd_bound requires overparam/classical parameters, got {hp.regime}")
    if s < 0 or N < 1:
        raise ValidationError("need s >= 0 and N >= 1")
    if N * (1.0 - hp.c) < 2.0:
        raise ValidationError(f"N*(1-c) = {N * (1.0 - hp.c)} violates N*(1-c) >= 2")
    bc = bound_constants(inst.spectrum, hp)
    cuts = compute_cutoffs(inst.spectrum, hp, N)
    eb, seg_b = _asgd_effective_bias(inst, hp, cuts, s, N, variant)
    ev, seg_v = _asgd_effective_variance(inst, hp, cuts, bc.r, s, N, variant)
    segments = {**seg_b, **seg_v}
    return BoundReport("asgd", variant, eb, ev, 2.0 * (eb + ev), segments, bc, cuts)


def sgd_bound(inst: ProblemInstance, delta: float, psi: float, s: int, N: int) -> BoundReport:
    """Excess-risk bound for tail-averaged constant-stepsize SGD."""
    if s < 0 or N < 1:
        raise ValidationError("need s >= 0 and N >= 1")
    tr = inst.spectrum.trace()
    if delta <= 0:
        raise ValidationError("delta must be positive")
    den = 1.0 - psi * delta * tr
    if den <= 0:
        raise InfeasibleError(f"psi*delta*trace = {psi * delta * tr} >= 1; r_sgd is infinite")
    r = 1.0 / den
    lam = inst.spectrum.eigenvalues
    v2 = inst.shift() ** 2
    ks = int(np.sum(lam >= 1.0 / (delta * N)))
    tail2 = tail_sum_squares(inst.spectrum, ks)
    sigma2 = inst.noise_variance

    shrink = (1.0 - delta * lam) ** (2 * s)
    eb_head = 1.0 / (delta ** 2 * N ** 2) * _wsum(shrink * v2 / lam, 0, ks)
    eb_tail = _wsum(shrink * lam * v2, ks, inst.d)
    eb = eb_head + eb_tail

    noise = sigma2 * r * (ks / N + (s + N) * delta ** 2 * tail2)
    init_norm = 1.0 / delta * _wsum(v2, 0, ks) + (s + N) * _wsum(lam * v2, ks, inst.d)
    init = 4.0 * psi * r / N * init_norm * (ks / N + N * delta ** 2 * tail2)
    ev = noise + init

    cuts = Cutoffs(0, 0, 0, ks, ks)
    segments = {"bias:0:k_star_sgd": eb_head, "bias:k_star_sgd:inf": eb_tail,
                "var_noise:0:k_star_sgd": sigma2 * r * ks / N,
                "var_noise:k_star_sgd:inf": sigma2 * r * (s + N) * delta ** 2 * tail2,
                "var_init:all": init}
    return BoundReport("sgd", "main", eb, ev, 2.0 * (eb + ev), segments, None, cuts)


def shb_bound(inst: ProblemInstance, hp: HyperParams, s: int, N: int,
              variant: str = "appendix") -> BoundReport:
    """Excess-risk bound for the stochastic heavy ball specialization (delta = 0)."""
    _check_variant(variant)
    if hp.regime != "shb":
        raise ValidationError(f"shb_bound requires heavy-ball parameters, got {hp.regime}")
    if s < 0 or N < 1:
        raise ValidationError("need s >= 0 and N >= 1")
    c, gamma = hp.c, hp.gamma
    if not (0 < c <= 1.0 - 2.0 / N):
        raise ValidationError(f"c={c} violates c in (0, 1-2/N] for N={N}")
    bc = bound_constants(inst.spectrum, hp)
    r = bc.r
    cuts = compute_cutoffs(inst.spectrum, hp, N)
    kd, ks = cuts.k_dagger, cuts.k_star
    lam = inst.spectrum.eigenvalues
    v2 = inst.shift() ** 2
    sigma2 = inst.noise_variance
    tau = _tail_coef(hp, variant)

    shrink = (1.0 - gamma * lam / 2.0) ** (2 * s)
    eb_head = c ** s * (4.0 * s ** 2 + 100.0 / (1.0 - c) ** 2) / N ** 2 * _wsum(lam * v2, 0, kd)
    eb_small = 18.0 / (N ** 2 * gamma ** 2) * _wsum(shrink * v2 / lam, kd, ks)
    eb_tail = 18.0 * _wsum(shrink * lam * v2, ks, inst.d)
    eb = math.fsum([eb_head, eb_small, eb_tail])

    tail2 = tail_sum_squares(inst.spectrum, ks)
    noise = sigma2 * r * (27.0 * ks / (2.0 * N) + 18.0 * (s + N) * tau ** 2 * tail2)
    init_norm = (10.0 / (1.0 - c) * _wsum(lam * v2, 0, kd)
                 + 2.0 / gamma * _wsum(v2, kd, ks)
                 + 4.0 * (s + N) * _wsum(lam * v2, ks, inst.d))
    init = hp.psi * r / N * (9.0 * ks / N + 36.0 * N * tau ** 2 * tail2) * init_norm
    ev = noise + init

    segments = {"bias:0:k_dagger": eb_head, f"bias:{SEG_SMALL}": eb_small,
                f"bias:{SEG_TAIL}": eb_tail, "var_noise:0:k_star": noise, "var_init:all": init}
    return BoundReport("shb", variant, eb, ev, 2.0 * (eb + ev), segments, bc, cuts)


def classical_bound(inst: ProblemInstance, psi: float, s: int, N: int,
                    variant: str = "appendix") -> BoundReport:
    """Strongly convex (finite-dimensional) display; aggregation factor 1.

    variant="main" is the headline display in terms of beta and
    L(w0) - L(w*); variant="appendix" the proof-level display in terms of
    1 - c and the H-norm (its sigma^2 d factor on the 128 term restored).
    """
    from .hyper import derive_classical

    _check_variant(variant)
    if s < 0 or N < 1:
        raise ValidationError("need s >= 0 and N >= 1")
    hp = derive_classical(inst.spectrum, psi)
    d = inst.d
    sigma2 = inst.noise_variance
    h_norm = float(math.fsum(inst.spectrum.eigenvalues * inst.shift() ** 2))
    loss_gap = 0.5 * h_norm
    if variant == "main":
        beta = hp.beta
        eb = 100.0 / (N ** 2 * beta ** 2) * math.exp(-beta * s / 2.0) * loss_gap
        ev = (1008.0 * psi * d / (N ** 2 * beta) * loss_gap
              + 36.0 * sigma2 * d / N + 128.0 * sigma2 * d / (N ** 2 * beta))
    else:
        omc = 1.0 - hp.c
        eb = 100.0 / (N ** 2 * omc ** 2) * math.exp(-omc * s / 2.0) * h_norm
        ev = (1008.0 * psi * d / (N ** 2 * omc) * h_norm
              + 36.0 * sigma2 * d / N + 128.0 * sigma2 * d / (N ** 2 * omc))
    bc = bound_constants(inst.spectrum, hp)
    cuts = compute_cutoffs(inst.spectrum, hp, N)
    segments = {"bias:all": eb, "var:all": ev}
    return BoundReport("classical", variant, eb, ev, eb + ev, segments, bc, cuts,
                       aggregation=1.0)


def onehot_bound(inst: ProblemInstance, hp: HyperParams, s: int, N: int,
                 variant: str = "appendix") -> BoundReport:
    """Excess-risk bound under one-hot inputs; series constant from max (U_i)_22.

    The effective bias is the accelerated-SGD one; the initialization part of
    the effective variance switches to inverse-H-weighted norms.
    """
    _check_variant(variant)
    if s < 0 or N < 1:
        raise ValidationError("need s >= 0 and N >= 1")
    c, q, delta, gamma = hp.c, hp.q, hp.delta, hp.gamma
    if not (0 < gamma < 1):
        raise ValidationError("one-hot analysis requires gamma in (0, 1)")
    if not (0 < delta <= gamma):
        raise ValidationError("one-hot analysis requires delta in (0, gamma]")
    if not (0 < hp.beta < 1):
        raise ValidationError("one-hot analysis requires beta in (0, 1)")
    if N * (1.0 - c) < 2.0:
        raise ValidationError(f"N*(1-c) = {N * (1.0 - c)} violates N*(1-c) >= 2")
    bc = bound_constants(inst.spectrum, hp)
    r = bc.r_onehot
    if not math.isfinite(r):
        raise InfeasibleError("max (U_i)_22 >= 1; the one-hot series constant is infinite")
    cuts = compute_cutoffs(inst.spectrum, hp, N)
    khat, kd, ks = cuts.k_hat, cuts.k_dagger, cuts.k_star
    lam = inst.spectrum.eigenvalues
    v2 = inst.shift() ** 2
    sigma2 = inst.noise_variance
    tau = _tail_coef(hp, variant)
    tail2 = tail_sum_squares(inst.spectrum, ks)

    eb, seg_b = _asgd_effective_bias(inst, hp, cuts, s, N, variant)

    noise = sigma2 * r * (27.0 * ks / (2.0 * N) + 18.0 * (s + N) * tau ** 2 * tail2)
    if variant == "main":
        small_coef = 18.0 / gamma
        tail_coef = 36.0 * gamma ** 2 * N ** 2 * s
    else:
        small_coef = 9.0 * (1.0 - c) / (q - c * delta)
        tail_coef = 18.0 * (q - c * delta) ** 2 * N ** 2 * (2 * s + N) / (1.0 - c) ** 2
    init = r / N ** 2 * (126.0 / delta * _wsum(v2 / lam, 0, khat)
                         + 90.0 / (1.0 - c) * _wsum(v2, khat, kd)
                         + small_coef * _wsum(v2 / lam, kd, ks)
                         + tail_coef * _wsum(lam * lam * v2, ks, inst.d))
    ev = noise + init
    segments = {**seg_b, "var_noise:0:k_star": noise, "var_init:all": init}
    return BoundReport("onehot", variant, eb, ev, 2.0 * (eb + ev), segments, bc, cuts)


@dataclass(frozen=True)
class CompareRow:
    index: int
    lam: float
    asgd_base: float
    sgd_base: float
    winner: str


@dataclass(frozen=True)
class CompareReport:
    rows: list
    k_hat: int
    asgd_total: float
    sgd_total: float


def compare_report(inst: ProblemInstance, hp: HyperParams, sgd_delta: float,
                   s: int, N: int, max_rows: int | None = None,
                   variant: str = "appendix") -> CompareReport:
    """Per-eigendirection decay comparison plus the two total bounds.

    The winner flag flips at k_hat: the accelerated base is no larger beyond
    it and no smaller up to it (ties allowed at the boundary); a violation
    raises, since it would contradict the cutoff algebra.
    """
    cuts = compute_cutoffs(inst.spectrum, hp, N, sgd_delta=sgd_delta)
    lam = inst.spectrum.eigenvalues
    n_rows = inst.d if max_rows is None else min(inst.d, max_rows)
    rows = []
    tol = 1e-12
    for i in range(n_rows):
        a = decay_rate(float(lam[i]), hp)
        g = 1.0 - sgd_delta * float(lam[i])
        if abs(a - g) <= tol * max(1.0, abs(a), abs(g)):
            winner = "tie"
        else:
            winner = "asgd" if a < g else "sgd"
        idx = i + 1
        if idx <= cuts.k_hat and a < g - tol:
            raise ArithmeticError(
                f"decay comparison violated at index {idx} <= k_hat={cuts.k_hat}")
        if idx > cuts.k_hat and a > g + tol:
            raise ArithmeticError(
                f"decay comparison violated at index {idx} > k_hat={cuts.k_hat}")
        rows.append(CompareRow(idx, float(lam[i]), a, g, winner))
    asgd_total = asgd_bound(inst, hp, s, N, variant=variant).total
    sgd_total = sgd_bound(inst, sgd_delta, hp.psi, s, N).total
    return CompareReport(rows, cuts.k_hat, asgd_total, sgd_total)


@dataclass(frozen=True)
class ScalingFit:
    mode: str
    slope: float
    intercept: float
    r_squared: float
    n_grid: np.ndarray
    values: np.ndarray


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def variance_scaling(spectrum: Spectrum, kappa_tilde: int, psi: float,
                     N_grid, fit: str = "loglog", variant: str = "appendix") -> ScalingFit:
    """Noise-variance bound across a sample-size grid, with a scaling fit.

    For each N the parameters are re-derived at their feasibility caps
    (delta = 1/(2*psi*trace), gamma = 1/(2*psi*tail(kappa_tilde))), w0 = w*,
    sigma^2 = 1, s = N, and the effective dimension is recomputed.
    fit="loglog" regresses log(EV) on log(N) (power-law exponent);
    fit="semilog" regresses N*EV on log(N) (logarithmic growth).
    """
    from .hyper import derive_overparam
    from .spectrum import tail_sum

    n_grid = np.asarray(sorted(int(n) for n in N_grid))
    if n_grid.size < 2 or n_grid[-1] / n_grid[0] < 100:
        raise ValidationError("N grid must span at least two decades")
    tr = spectrum.trace()
    delta = 1.0 / (2.0 * psi * tr)
    tail = tail_sum(spectrum, kappa_tilde)
    gamma = 1.0 / (2.0 * psi * tail)
    hp = derive_overparam(delta, gamma, kappa_tilde, psi, spectrum)
    bc = bound_constants(spectrum, hp)
    tau = _tail_coef(hp, variant)
    lam = spectrum.eigenvalues
    values = np.empty(n_grid.size)
    for idx, n in enumerate(n_grid):
        ks = int(np.sum(lam >= 1.0 / ((gamma + delta) * n)))
        tail2 = tail_sum_squares(spectrum, ks)
        values[idx] = bc.r * (27.0 * ks / (2.0 * n) + 18.0 * (2 * n) * tau ** 2 * tail2)
    if fit == "loglog":
        slope, intercept, r2 = _linfit(np.log(n_grid.astype(float)), np.log(values))
    elif fit == "semilog":
        slope, intercept, r2 = _linfit(np.log(n_grid.astype(float)), n_grid * values)
    else:
        raise ValidationError(f"unknown fit mode {fit!r}")
    return ScalingFit(fit, slope, intercept, r2, n_grid, values)
