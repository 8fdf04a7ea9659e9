"""Eigenvalue spectra of the diagonal data covariance and problem instances.

The data covariance is diagonal throughout, so a spectrum is just a
non-increasing list of positive eigenvalues truncated at dimension ``d``.
All trace/tail sums use exact compensated summation (``math.fsum``): the
spectra of interest decay fast, and naive accumulation loses digits once
``d`` reaches 1e5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = ["Spectrum", "ProblemInstance", "make_spectrum", "tail_sum", "segmented_norm"]


@dataclass(frozen=True)
class Spectrum:
    """Non-increasing positive eigenvalues lambda_1 >= ... >= lambda_d > 0."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        if lam.ndim != 1 or lam.size == 0:
            raise ValidationError("spectrum must be a non-empty 1-d array")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValidationError("spectrum entries must be finite and strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ValidationError("spectrum entries must be non-increasing")

    @property
    def d(self) -> int:
        return int(self.eigenvalues.size)

    def trace(self) -> float:
        return math.fsum(self.eigenvalues)

    def __len__(self) -> int:
        return self.d


@dataclass(frozen=True)
class ProblemInstance:
    """A regression instance: covariance spectrum, optimum, start point, noise.

    ``noise_variance`` is the label-noise *variance* (not a standard
    deviation); ``psi`` is the fourth-moment constant, 3 for Gaussian inputs.
    """

    spectrum: Spectrum
    w_star: np.ndarray
    w0: np.ndarray
    noise_variance: float
    psi: float = 3.0

    def __post_init__(self):
        d = self.spectrum.d
        for name in ("w_star", "w0"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (d,):
                raise ValidationError(f"{name} must have length d={d}, got shape {v.shape}")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if self.noise_variance < 0:
            raise ValidationError("noise_variance must be >= 0")
        if self.psi < 1:
            raise ValidationError("psi must be >= 1")

    @property
    def d(self) -> int:
        return self.spectrum.d

    def shift(self) -> np.ndarray:
        """w0 - w_star, the quantity every bias term is built from."""
        return self.w0 - self.w_star


def make_spectrum(kind: str, d: int, *, exponent: float | None = None,
                  rate: float | None = None, values=None) -> Spectrum:
    """Construct a spectrum of the given kind truncated at dimension ``d``.

    kind="polynomial": lambda_i = i**(-exponent), exponent > 1.
    kind="exponential": lambda_i = exp(-rate * i), rate > 0.
    kind="custom": explicit non-increasing positive list (d must match).
    Indices are 1-based in the formulas.
    """
    if d < 1:
        raise ValidationError("d must be >= 1")
    if kind == "polynomial":
        if exponent is None or exponent <= 1:
            raise ValidationError("polynomial spectrum requires exponent > 1")
        i = np.arange(1, d + 1, dtype=float)
        return Spectrum(i ** (-exponent))
    if kind == "exponential":
        if rate is None or rate <= 0:
            raise ValidationError("exponential spectrum requires rate > 0")
        i = np.arange(1, d + 1, dtype=float)
        return Spectrum(np.exp(-rate * i))
    if kind == "custom":
        if values is None or len(values) == 0:
            raise ValidationError("custom spectrum requires a non-empty value list")
        if len(values) != d:
            raise ValidationError(f"custom spectrum has {len(values)} entries, expected d={d}")
        return Spectrum(np.asarray(values, dtype=float))
    raise ValidationError(f"unknown spectrum kind {kind!r}")


def tail_sum(s: Spectrum, k: int) -> float:
    """Sum of eigenvalues strictly past index k (1-based), compensated."""
    if not 0 <= k <= s.d:
        raise ValidationError(f"tail index k={k} outside [0, {s.d}]")
    return math.fsum(s.eigenvalues[k:])


def tail_sum_squares(s: Spectrum, k: int) -> float:
    """Sum of squared eigenvalues strictly past index k."""
    if not 0 <= k <= s.d:
        raise ValidationError(f"tail index k={k} outside [0, {s.d}]")
    return math.fsum(s.eigenvalues[k:] ** 2)


def segmented_norm(v: np.ndarray, s: Spectrum, lo: int, hi: int, weight: str = "H") -> float:
    """Weighted squared norm of v over the index segment (lo, hi].

    Segments are left-open/right-closed in 1-based index terms: the sum runs
    over i = lo+1 .. hi.  weight is "H" (lambda_i), "Hinv" (1/lambda_i),
    "I" (1), or "H2" (lambda_i**2).
    """
    if not 0 <= lo <= hi <= s.d:
        raise ValidationError(f"segment ({lo}, {hi}] outside [0, {s.d}]")
    v = np.asarray(v, dtype=float)
    if v.shape != (s.d,):
        raise ValidationError(f"vector must have length d={s.d}")
    if lo == hi:
        return 0.0
    lam = s.eigenvalues[lo:hi]
    seg = v[lo:hi] ** 2
    if weight == "H":
        terms = lam * seg
    elif weight == "Hinv":
        terms = seg / lam
    elif weight == "I":
        terms = seg
    elif weight == "H2":
        terms = lam * lam * seg
    else:
        raise ValidationError(f"unknown weight {weight!r}")
    return math.fsum(terms)
