"""Brute-force dense reference for the second-moment dynamics.

Deliberately independent of :mod:`asgdlab.oracle`: the state here is the full
2d x 2d second-moment matrix plus dense accumulator cross-moments, evolved
with explicit matrix products and Kronecker blocks.  It is quadratic in d and
exists only to cross-check the per-coordinate recursion on small instances.
Runs in extended precision so the reference is strictly more accurate than
the float64 recursion it certifies (tail averaging near c ~ 1 is a
cancellation-heavy sum).
"""

from __future__ import annotations

import numpy as np

from .hyper import HyperParams
from .spectrum import ProblemInstance

__all__ = ["dense_risk"]


def dense_risk(inst: ProblemInstance, hp: HyperParams, kind: str,
               s: int, N: int, mode: str, probabilities=None) -> float:
    """Tail-averaged excess risk from the dense operator simulation."""
    lam = inst.spectrum.eigenvalues.astype(np.longdouble)
    d = lam.size
    c, q, delta = (np.longdouble(hp.c), np.longdouble(hp.q), np.longdouble(hp.delta))
    H = np.diag(lam)
    A = np.block([[np.zeros((d, d)), np.eye(d) - delta * H],
                  [-c * np.eye(d), (1.0 + c) * np.eye(d) - q * H]])
    K = np.array([[delta ** 2, delta * q], [delta * q, q ** 2]])
    sigma2 = 0.0 if mode == "bias" else inst.noise_variance

    if kind == "gaussian":
        def fourth(m22):
            return 2.0 * H @ m22 @ H + np.trace(H @ m22) * H
    elif kind == "onehot":
        p = lam / lam.sum() if probabilities is None else np.asarray(probabilities, np.longdouble)

        def fourth(m22):
            return np.diag(lam ** 2 / p * np.diag(m22))
    elif kind == "meanfield":
        def fourth(m22):
            return H @ m22 @ H
    else:
        raise ValueError(f"unknown fourth-moment kind {kind!r}")

    if mode == "variance":
        M = np.zeros((2 * d, 2 * d), dtype=np.longdouble)
    else:
        v = (inst.w0 - inst.w_star).astype(np.longdouble)
        vv = np.outer(v, v)
        M = np.block([[vv, vv], [vv, vv]])

    SE = np.zeros((d, 2 * d), dtype=np.longdouble)  # E[S eta^T]
    SS = np.zeros((d, d), dtype=np.longdouble)      # E[S S^T]
    for t in range(s + N):
        m22 = M[d:, d:]
        excess = fourth(m22) - H @ m22 @ H
        M_new = A @ M @ A.T + np.kron(K, excess) + sigma2 * np.kron(K, H)
        SE_new = SE @ A.T
        if t >= s:
            cross = SE_new[:, :d]
            SS = SS + cross + cross.T + M_new[:d, :d]
            SE_new = SE_new + M_new[:d, :]
        M, SE = M_new, SE_new
    return float(np.trace(H @ SS)) / (2.0 * N * N)
