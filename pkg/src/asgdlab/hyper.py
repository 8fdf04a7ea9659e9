"""Hyperparameter derivation and validation, eigenvalue cutoffs, bound constants.

The accelerated scheme is driven by (alpha, beta, gamma, delta); everything
downstream only sees the contractions c = alpha*(1-beta) and
q = alpha*delta + (1-alpha)*gamma.  Three derivation regimes are supported:

* overparameterized -- delta <= 1/(2*psi*trace), gamma in
  [delta, 1/(2*psi*tail(kappa_tilde))], beta = delta/(psi*kappa_tilde*gamma);
* classical (strongly convex) -- delta = 1/(2*psi*trace),
  gamma = sqrt(2*delta/(psi*mu*d)), beta = sqrt(mu*delta/(2*psi*d));
* heavy ball -- delta = 0, q = (1-c)*gamma/2, c in (0, 1-2/N].

In every regime alpha = 1/(1+beta), which makes c = 2*alpha - 1 and
(q - c*delta)/(1 - c) = (gamma + delta)/2 exact identities (to rounding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, ValidationError
from .spectrum import Spectrum, tail_sum

__all__ = [
    "HyperParams", "Cutoffs", "BoundConstants",
    "derive_overparam", "derive_from_alpha", "derive_classical", "derive_shb",
    "manual_params", "compute_cutoffs", "bound_constants",
]

REGIMES = ("overparam", "classical", "shb", "manual")


@dataclass(frozen=True)
class HyperParams:
    alpha: float
    beta: float
    gamma: float
    delta: float
    psi: float
    kappa_tilde: int
    regime: str

    @property
    def c(self) -> float:
        return self.alpha * (1.0 - self.beta)

    @property
    def q(self) -> float:
        return self.alpha * self.delta + (1.0 - self.alpha) * self.gamma

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValidationError(f"unknown regime {self.regime!r}")
        if not (0 < self.alpha < 1):
            raise ValidationError("alpha must lie in (0, 1)")
        if not (0 < self.beta < 1):
            raise ValidationError("beta must lie in (0, 1)")
        if self.delta < 0 or self.gamma < 0:
            raise ValidationError("delta and gamma must be nonnegative")
        if self.psi < 1:
            raise ValidationError("psi must be >= 1")


@dataclass(frozen=True)
class Cutoffs:
    """Eigen-index thresholds partitioning the spectrum into dynamical regimes.

    Indices are 1-based counts: k of the d eigenvalues are at or above the
    corresponding threshold.  The max over an empty index set is 0.
    """

    k_ddagger: int
    k_hat: int
    k_dagger: int
    k_star: int
    k_star_sgd: int


@dataclass(frozen=True)
class BoundConstants:
    l: float
    r: float
    u22: np.ndarray
    r_onehot: float


def _check_eq7(delta: float, gamma: float, kappa_tilde: int, psi: float,
               s: Spectrum) -> None:
    if kappa_tilde < 1:
        raise ValidationError("kappa_tilde must be >= 1")
    if psi < 1:
        raise ValidationError("psi must be >= 1")
    if kappa_tilde > s.d:
        raise ValidationError(f"kappa_tilde={kappa_tilde} exceeds d={s.d}")
    tr = s.trace()
    if delta <= 0 or delta > 1.0 / (2.0 * psi * tr):
        raise ValidationError(
            f"delta={delta} violates 0 < delta <= 1/(2*psi*trace) = {1.0 / (2.0 * psi * tr)}")
    if gamma < delta:
        raise ValidationError(f"gamma={gamma} violates gamma >= delta = {delta}")
    tail = tail_sum(s, kappa_tilde)
    if tail > 0 and gamma > 1.0 / (2.0 * psi * tail):
        raise ValidationError(
            f"gamma={gamma} violates gamma <= 1/(2*psi*tail({kappa_tilde})) "
            f"= {1.0 / (2.0 * psi * tail)}")


def derive_overparam(delta: float, gamma: float, kappa_tilde: int, psi: float,
                     s: Spectrum) -> HyperParams:
    """Pick (alpha, beta) from (delta, gamma, kappa_tilde) in the overparameterized regime."""
    _check_eq7(delta, gamma, kappa_tilde, psi, s)
    beta = delta / (psi * kappa_tilde * gamma)
    if not (0 < beta < 1):
        raise ValidationError(
            f"beta = delta/(psi*kappa_tilde*gamma) = {beta} falls outside (0, 1)")
    alpha = 1.0 / (1.0 + beta)
    return HyperParams(alpha, beta, gamma, delta, psi, kappa_tilde, "overparam")


def derive_from_alpha(delta: float, alpha: float, kappa_tilde: int, psi: float,
                      s: Spectrum) -> HyperParams:
    """Same regime, but parameterized by alpha; gamma = delta/(psi*kappa_tilde*beta)."""
    if not (0.5 < alpha < 1):
        raise ValidationError("alpha must lie in (1/2, 1)")
    beta = (1.0 - alpha) / alpha
    gamma = delta / (psi * kappa_tilde * beta)
    _check_eq7(delta, gamma, kappa_tilde, psi, s)
    return HyperParams(alpha, beta, gamma, delta, psi, kappa_tilde, "overparam")


def derive_classical(s: Spectrum, psi: float) -> HyperParams:
    """Strongly convex parameter choice; kappa_tilde is pinned to d."""
    tr = s.trace()
    mu = float(s.eigenvalues[-1])
    d = s.d
    delta = 1.0 / (2.0 * psi * tr)
    gamma = math.sqrt(2.0 * delta / (psi * mu * d))
    beta = math.sqrt(mu * delta / (2.0 * psi * d))
    alpha = 1.0 / (1.0 + beta)
    return HyperParams(alpha, beta, gamma, delta, psi, d, "classical")


def derive_shb(c: float, gamma: float, s: Spectrum, psi: float, N: int) -> HyperParams:
    """Heavy-ball specialization: delta = 0, q = (1-c)*gamma/2."""
    if N < 3:
        raise ValidationError("N must be >= 3 so that (0, 1-2/N] is non-empty")
    if not (0 < c <= 1.0 - 2.0 / N):
        raise ValidationError(f"c={c} violates c in (0, 1-2/N] = (0, {1.0 - 2.0 / N}]")
    tr = s.trace()
    if not (0 < gamma < 4.0 / (psi * tr)):
        raise ValidationError(
            f"gamma={gamma} violates gamma in (0, 4/(psi*trace)) = (0, {4.0 / (psi * tr)})")
    alpha = (1.0 + c) / 2.0
    beta = (1.0 - alpha) / alpha
    return HyperParams(alpha, beta, gamma, 0.0, psi, 0, "shb")


def manual_params(alpha: float, beta: float, gamma: float, delta: float,
                  psi: float, kappa_tilde: int = 0) -> HyperParams:
    """Raw parameters with no regime constraints (one-hot analysis, tests)."""
    return HyperParams(alpha, beta, gamma, delta, psi, kappa_tilde, "manual")


def complex_window(hp: HyperParams) -> tuple[float, float]:
    """(lower, upper) eigenvalue thresholds delimiting the complex-root region."""
    c, q, delta = hp.c, hp.q, hp.delta
    rp = math.sqrt(q - c * delta)
    rm = math.sqrt(c * (q - delta))
    return ((rp - rm) ** 2 / q ** 2, (rp + rm) ** 2 / q ** 2)


def compute_cutoffs(s: Spectrum, hp: HyperParams, N: int,
                    sgd_delta: float | None = None) -> Cutoffs:
    """Count eigenvalues above each dynamical threshold.

    Comparisons are the exact >= / > of the definitions, evaluated in double
    precision with no tolerance band.  For the heavy-ball regime the large
    and middle cutoffs are pinned to 0 (delta = 0 empties both).
    """
    if N < 1:
        raise ValidationError("N must be >= 1")
    lam = s.eigenvalues
    c, q, delta, gamma = hp.c, hp.q, hp.delta, hp.gamma
    thr_lo, thr_hi = complex_window(hp)
    if hp.regime == "shb":
        k_ddagger = 0
        k_hat = 0
    else:
        k_ddagger = int(np.sum(lam >= thr_hi))
        k_hat = int(np.sum(lam >= (1.0 - c) / delta)) if delta > 0 else 0
    k_dagger = int(np.sum(lam > thr_lo))
    k_star = int(np.sum(lam >= 1.0 / ((gamma + delta) * N)))
    if sgd_delta is None:
        sgd_delta = hp.delta
    k_star_sgd = int(np.sum(lam >= 1.0 / (sgd_delta * N))) if sgd_delta > 0 else 0
    return Cutoffs(k_ddagger, k_hat, k_dagger, k_star, k_star_sgd)


def u22_values(s: Spectrum, hp: HyperParams) -> np.ndarray:
    """Per-index (U_i)_22 = delta/2 + (1+c)(q-delta) / (2(1-c^2+c*lam*(q+c*delta)))."""
    c, q, delta = hp.c, hp.q, hp.delta
    lam = s.eigenvalues
    return delta / 2.0 + (1.0 + c) * (q - delta) / (
        2.0 * (1.0 - c * c + c * lam * (q + c * delta)))


def bound_constants(s: Spectrum, hp: HyperParams) -> BoundConstants:
    """The geometric-series constants l, r plus the per-index U22 diagonal.

    For delta = 0 (heavy ball) the l formula degenerates; that regime carries
    its own series constant r_SHB = 1/(1 - psi*gamma*trace/4), which the bound
    evaluators compute directly, so here l is reported for the generic formula
    only when delta > 0.
    """
    psi = hp.psi
    if hp.regime == "shb":
        l = hp.q * s.trace() / (2.0 * (1.0 - hp.c))
        r_den = 1.0 - psi * hp.gamma * s.trace() / 4.0
        if r_den <= 0:
            raise InfeasibleError(
                f"psi*gamma*trace/4 = {psi * hp.gamma * s.trace() / 4.0} >= 1; "
                "the heavy-ball series constant is infinite")
        r = 1.0 / r_den
    else:
        kt = min(hp.kappa_tilde, s.d) if hp.kappa_tilde >= 1 else s.d
        l = (hp.delta * s.trace() / 2.0 + 1.0 / (2.0 * psi)
             + hp.gamma / 4.0 * tail_sum(s, kt))
        if psi * l >= 1.0:
            # guaranteed finite under the overparam/classical derivations;
            # manual parameters may only need the one-hot constant
            if hp.regime in ("overparam", "classical"):
                raise InfeasibleError(
                    f"psi*l = {psi * l} >= 1; r = 1/(1-psi*l) is infinite")
            r = math.inf
        else:
            r = 1.0 / (1.0 - psi * l)
    u22 = u22_values(s, hp)
    u22_max = float(np.max(u22))
    # infinite when max U22 >= 1: only the one-hot evaluator needs it finite
    r_onehot = 1.0 / (1.0 - u22_max) if u22_max < 1.0 else math.inf
    return BoundConstants(l=l, r=r, u22=u22, r_onehot=r_onehot)
