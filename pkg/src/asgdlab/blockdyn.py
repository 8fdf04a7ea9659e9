"""Exact spectral analysis of the per-eigenvalue 2x2 iteration blocks.

Each covariance eigenvalue lambda owns the companion-like block

    A = [[0,  1 - delta*lambda], [-c, 1 + c - q*lambda]]

whose eigenvalues x1, x2 drive the bias decay in that eigen-direction.  All
eigen-arithmetic runs in complex doubles even when the roots are real: one
code path then covers the closed-form powers and geometric partial sums at
every lambda, with no branch at the regime boundaries.  The only special
case is a (near-)double root, where the divided difference
(x2^m - x1^m)/(x2 - x1) is replaced by its limit m*x^(m-1).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hyper import HyperParams, complex_window

__all__ = ["Block", "EigenPair", "block", "eigenpair", "power_closed",
           "partial_sum_vec", "decay_rate"]

REAL_LARGE = "real_large"
COMPLEX = "complex"
REAL_SMALL = "real_small"

# |x2 - x1| below this (relative) scale is treated as a double root.
_DEGENERATE_REL = 1e-9


@dataclass(frozen=True)
class Block:
    lam: float
    m: np.ndarray


@dataclass(frozen=True)
class EigenPair:
    x1: complex
    x2: complex
    discriminant: float
    regime: str


def block(lam: float, hp: HyperParams) -> Block:
    """The 2x2 iteration block for eigenvalue ``lam`` (lam = 0 allowed in tests)."""
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    c, q, delta = hp.c, hp.q, hp.delta
    m = np.array([[0.0, 1.0 - delta * lam], [-c, 1.0 + c - q * lam]])
    m.setflags(write=False)
    return Block(lam=lam, m=m)


def eigenpair(lam: float, hp: HyperParams) -> EigenPair:
    """Eigenvalues of the block, ordered x1 <= x2 (real) or by imaginary sign.

    The larger-magnitude real root is computed first from the quadratic
    formula; the other follows from the product identity x1*x2 =
    c*(1 - delta*lam), which avoids cancellation when the roots are far apart.
    """
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    c, q, delta = hp.c, hp.q, hp.delta
    tr = 1.0 + c - q * lam
    prod = c * (1.0 - delta * lam)
    disc = tr * tr - 4.0 * prod
    if disc < 0.0:
        root = cmath.sqrt(complex(disc, 0.0))
        x2 = complex(tr / 2.0, root.imag / 2.0)
        x1 = x2.conjugate()
        return EigenPair(x1=x1, x2=x2, discriminant=disc, regime=COMPLEX)
    sq = math.sqrt(disc)
    big = (tr + math.copysign(sq, tr)) / 2.0
    other = prod / big if big != 0.0 else 0.0
    x1, x2 = sorted((big, other))
    regime = REAL_LARGE if lam >= complex_window(hp)[1] else REAL_SMALL
    return EigenPair(x1=complex(x1), x2=complex(x2), discriminant=disc, regime=regime)


def _is_degenerate(pair: EigenPair) -> bool:
    return abs(pair.x2 - pair.x1) < _DEGENERATE_REL * (abs(pair.x1) + abs(pair.x2) + 1.0)


def _ratio(pair: EigenPair, m: int) -> complex:
    """(x2^m - x1^m)/(x2 - x1), with the m*x^(m-1) limit at a double root."""
    if m == 0:
        return 0.0 + 0.0j
    if _is_degenerate(pair):
        x = (pair.x1 + pair.x2) / 2.0
        return m * x ** (m - 1)
    return (pair.x2 ** m - pair.x1 ** m) / (pair.x2 - pair.x1)


def _realized(z, context: str):
    """Strip an imaginary residue, insisting it is rounding-level noise."""
    z = np.asarray(z, dtype=complex)
    scale = np.max(np.abs(z)) + 1.0
    resid = np.max(np.abs(z.imag))
    if resid > 1e-12 * scale:
        raise ArithmeticError(f"{context}: imaginary residue {resid} exceeds 1e-12 scale")
    out = np.ascontiguousarray(z.real)
    return out


def power_closed(lam: float, hp: HyperParams, k: int) -> np.ndarray:
    """A^k in closed form from the eigenvalues; k >= 1."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    pair = eigenpair(lam, hp)
    c, delta = hp.c, hp.delta
    s_km1 = _ratio(pair, k - 1)
    s_k = _ratio(pair, k)
    s_kp1 = _ratio(pair, k + 1)
    one_minus = 1.0 - delta * lam
    mat = np.array([[-c * one_minus * s_km1, one_minus * s_k],
                    [-c * s_k, s_kp1]], dtype=complex)
    return _realized(mat, f"power_closed(lam={lam}, k={k})")


def _power_or_identity(lam: float, hp: HyperParams, k: int) -> np.ndarray:
    if k == 0:
        return np.eye(2)
    return power_closed(lam, hp, k)


def _resolvent_times(lam: float, hp: HyperParams, v: str) -> np.ndarray:
    """(I - A)^{-1} v for the two vectors the partial sums need.

    (I - A)^{-1} [delta, q]^T = (1/lam) [1, 1]^T and
    (I - A)^{-1} [1, 1]^T = [1-c+(q-delta)lam, 1-c]^T / ((q-c*delta) lam).
    """
    c, q, delta = hp.c, hp.q, hp.delta
    if v == "deltaq":
        return np.array([1.0, 1.0]) / lam
    if v == "ones":
        det = (q - c * delta) * lam
        return np.array([1.0 - c + (q - delta) * lam, 1.0 - c]) / det
    raise ValidationError(f"unknown summand vector {v!r}")


_VECTORS = {"deltaq": lambda hp: np.array([hp.delta, hp.q]), "ones": lambda hp: np.array([1.0, 1.0])}


def partial_sum_vec(lam: float, hp: HyperParams, j: int, t: int, v: str = "deltaq") -> np.ndarray:
    """sum_{k=0}^{t-1} A^{j+k} v, evaluated as (A^j - A^{j+t}) (I - A)^{-1} v.

    Near a double root the resolvent route loses accuracy, so the sum falls
    back to direct accumulation of the closed-form powers.
    """
    if j < 0:
        raise ValidationError("j must be >= 0")
    if t < 1:
        raise ValidationError("t must be >= 1")
    if v not in _VECTORS:
        raise ValidationError(f"unknown summand vector {v!r}")
    if lam <= 0:
        raise ValidationError("lambda must be positive (I - A must be invertible)")
    pair = eigenpair(lam, hp)
    if _is_degenerate(pair):
        vec = _VECTORS[v](hp)
        acc = np.zeros(2)
        for k in range(t):
            acc = acc + _power_or_identity(lam, hp, j + k) @ vec
        return acc
    w = _resolvent_times(lam, hp, v)
    diff = _power_or_identity(lam, hp, j) - _power_or_identity(lam, hp, j + t)
    return diff @ w


def decay_rate(lam: float, hp: HyperParams) -> float:
    """Per-step bias decay base in the eigen-direction of ``lam``.

    Large lambda (real roots): c*delta/q.  Middle (complex roots):
    sqrt(c*(1 - delta*lam)), the exact root magnitude.  Small lambda
    (real roots): 1 - (gamma + delta)*lam/2, the upper edge of the root
    bracket; the exact dominant root lies within a factor-2 window of the
    distance to 1 (see ``eigenpair`` for the exact value).
    """
    if lam <= 0:
        raise ValidationError("lambda must be positive")
    pair = eigenpair(lam, hp)
    c, q, delta, gamma = hp.c, hp.q, hp.delta, hp.gamma
    if pair.regime == REAL_LARGE:
        return c * delta / q
    if pair.regime == COMPLEX:
        return math.sqrt(c * (1.0 - delta * lam))
    return 1.0 - (gamma + delta) * lam / 2.0
