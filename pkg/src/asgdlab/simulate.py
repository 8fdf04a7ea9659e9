"""Streaming samplers and path-wise accelerated-SGD execution.

The covariance is diagonal, so every path runs per-coordinate in O(d) per
step: no matrices appear anywhere.  The update is written in increment form

    u  = w + (1-alpha)*(v - w)
    g  = (y - <u, x>) * x          (negated stochastic gradient)
    w' = u + delta*g
    v' = v + beta*(u - v) + gamma*g

which is algebraically the standard three-sequence scheme but makes the two
reductions exact in floating point: with delta = gamma and v0 = w0 the three
sequences collapse onto the plain SGD path bit-for-bit, and with delta = 0
the w-path is the two-term heavy-ball recursion.

Randomness comes from counter-based Philox streams keyed by
(base_seed, repetition), so repetitions are independent, replayable, and
identical whether they run sequentially or batched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .hyper import HyperParams
from .spectrum import ProblemInstance

__all__ = ["DataModel", "RunState", "PathRisk", "MonteCarloResult",
           "make_stream", "sample", "asgd_step", "init_state",
           "run_tail_averaged", "run_decomposed", "monte_carlo"]

_TIME_CHUNK = 256


def make_stream(base_seed: int, rep: int = 0) -> np.random.Generator:
    """Counter-based stream for repetition ``rep`` of experiment ``base_seed``."""
    key = np.array([np.uint64(base_seed & 0xFFFFFFFFFFFFFFFF), np.uint64(rep)])
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class DataModel:
    """Input distribution with second moment diag(lambda).

    kind="gaussian": x_i = sqrt(lambda_i) * z_i with z standard normal.
    kind="onehot": x = sqrt(lambda_I / p_I) * e_I with I ~ p; any positive
    probability vector summing to 1 is accepted (default p_i proportional
    to lambda_i).
    """

    kind: str
    instance: ProblemInstance
    probabilities: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "onehot"):
            raise ValidationError(f"unknown data model kind {self.kind!r}")
        if self.kind == "onehot":
            lam = self.instance.spectrum.eigenvalues
            p = self.probabilities
            if p is None:
                p = lam / lam.sum()
            p = np.asarray(p, dtype=float)
            if p.shape != lam.shape or np.any(p <= 0):
                raise ValidationError("one-hot probabilities must be positive, length d")
            if abs(p.sum() - 1.0) > 1e-12:
                raise ValidationError("one-hot probabilities must sum to 1")
            p.setflags(write=False)
            object.__setattr__(self, "probabilities", p)

    def scales(self) -> np.ndarray:
        lam = self.instance.spectrum.eigenvalues
        if self.kind == "gaussian":
            return np.sqrt(lam)
        return np.sqrt(lam / self.probabilities)


def sample(model: DataModel, rng: np.random.Generator):
    """One (x, y) draw: y = <w*, x> + eps, eps ~ N(0, sigma^2)."""
    inst = model.instance
    scale = model.scales()
    if model.kind == "gaussian":
        x = scale * rng.standard_normal(inst.d)
    else:
        i = int(np.searchsorted(np.cumsum(model.probabilities), rng.random()))
        x = np.zeros(inst.d)
        x[i] = scale[i]
    eps = math.sqrt(inst.noise_variance) * rng.standard_normal() if inst.noise_variance > 0 else 0.0
    y = float(x @ inst.w_star) + eps
    return x, y


@dataclass
class RunState:
    """Mutable per-run state; owned exclusively by its run."""

    w: np.ndarray
    v: np.ndarray
    step_index: int
    tail_accumulator: np.ndarray
    tail_compensation: np.ndarray
    tail_count: int
    avg_start: int
    avg_len: int


def init_state(w0: np.ndarray, avg_start: int, avg_len: int) -> RunState:
    w0 = np.asarray(w0, dtype=float)
    return RunState(w=w0.copy(), v=w0.copy(), step_index=0,
                    tail_accumulator=np.zeros_like(w0),
                    tail_compensation=np.zeros_like(w0),
                    tail_count=0, avg_start=avg_start, avg_len=avg_len)


def _kahan_add(acc: np.ndarray, comp: np.ndarray, term: np.ndarray) -> None:
    y = term - comp
    t = acc + y
    comp[...] = (t - acc) - y
    acc[...] = t


def asgd_step(state: RunState, hp: HyperParams, x: np.ndarray, y: float) -> RunState:
    """One accelerated step; the produced iterate joins the tail average when
    its step index falls in [avg_start, avg_start + avg_len)."""
    alpha, beta, gamma, delta = hp.alpha, hp.beta, hp.gamma, hp.delta
    u = state.w + (1.0 - alpha) * (state.v - state.w)
    g = (y - u @ x) * x
    w_new = u + delta * g
    v_new = state.v + beta * (u - state.v) + gamma * g
    state.w = w_new
    state.v = v_new
    if state.avg_start <= state.step_index < state.avg_start + state.avg_len:
        _kahan_add(state.tail_accumulator, state.tail_compensation, w_new)
        state.tail_count += 1
    state.step_index += 1
    return state


def excess_risk(spectrum_eigs: np.ndarray, w: np.ndarray, w_star: np.ndarray) -> float:
    """(1/2) * sum_i lambda_i (w_i - w*_i)^2, exactly from the known spectrum."""
    diff = w - w_star
    return 0.5 * math.fsum(spectrum_eigs * diff * diff)


@dataclass(frozen=True)
class PathRisk:
    excess_risk: float
    bias_part: float
    variance_part: float
    cross_part: float
    seed: tuple


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    per_rep: list
    stderr_defined: bool
    mean_bias: float
    mean_variance: float
    stderr_bias: float
    stderr_variance: float


def _draw_chunk(model: DataModel, gens: list, m: int):
    """Per-rep draws for one time chunk; order per rep: inputs then noises."""
    inst = model.instance
    sigma = math.sqrt(inst.noise_variance)
    if model.kind == "gaussian":
        z = np.stack([g.standard_normal((m, inst.d)) for g in gens])
        x = z * model.scales()
    else:
        cum = np.cumsum(model.probabilities)
        u = np.stack([g.random(m) for g in gens])
        idx = np.searchsorted(cum, u)
        np.clip(idx, 0, inst.d - 1, out=idx)
        x = np.zeros((len(gens), m, inst.d))
        b = np.arange(len(gens))[:, None]
        t = np.arange(m)[None, :]
        x[b, t, idx] = model.scales()[idx]
    eps = sigma * np.stack([g.standard_normal(m) for g in gens])
    return x, eps


def _run_batch(model: DataModel, hp: HyperParams, w0: np.ndarray, s: int, N: int,
               gens: list) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coupled full/bias/variance tail averages for a batch of streams.

    All three paths consume the identical (x_t, eps_t) stream: the full path
    starts at w0 with noise on, the bias path at w0 with noise forced to 0,
    the variance path at w* with noise on.  Returns three (B, d) arrays of
    tail-averaged iterates.
    """
    inst = model.instance
    B, d = len(gens), inst.d
    alpha, beta, gamma, delta = hp.alpha, hp.beta, hp.gamma, hp.delta
    wstar = inst.w_star
    w0 = np.asarray(w0, dtype=float)

    paths = {}
    for name, start in (("full", w0), ("bias", w0), ("var", wstar)):
        paths[name] = {
            "w": np.tile(start, (B, 1)), "v": np.tile(start, (B, 1)),
            "acc": np.zeros((B, d)), "comp": np.zeros((B, d)),
        }

    total = s + N
    t0 = 0
    while t0 < total:
        m = min(_TIME_CHUNK, total - t0)
        x, eps = _draw_chunk(model, gens, m)
        for k in range(m):
            xk = x[:, k, :]
            for name, st in paths.items():
                w, v = st["w"], st["v"]
                u = w + (1.0 - alpha) * (v - w)
                # centered error form: exactly zero at u = w* with no noise,
                # so the three paths decompose to the last bit
                err = np.einsum("bd,bd->b", wstar - u, xk)
                if name != "bias":
                    err = err + eps[:, k]
                g = err[:, None] * xk
                w_new = u + delta * g
                st["v"] = v + beta * (u - v) + gamma * g
                st["w"] = w_new
                if t0 + k >= s:
                    # accumulate centered so a path parked at w* averages to
                    # w* exactly
                    _kahan_add(st["acc"], st["comp"], w_new - wstar)
        t0 += m
    return tuple(wstar + paths[name]["acc"] / N for name in ("full", "bias", "var"))


def _risks_from_averages(inst: ProblemInstance, wb_full, wb_bias, wb_var, seed) -> PathRisk:
    lam = inst.spectrum.eigenvalues
    full = excess_risk(lam, wb_full, inst.w_star)
    bias = excess_risk(lam, wb_bias, inst.w_star)
    var = excess_risk(lam, wb_var, inst.w_star)
    cross = math.fsum(lam * (wb_bias - inst.w_star) * (wb_var - inst.w_star))
    return PathRisk(full, bias, var, cross, seed)


def _as_gens(rng_stream, count: int = 1) -> tuple[list, tuple]:
    if isinstance(rng_stream, np.random.Generator):
        return [rng_stream], ("generator", 0)
    seed = int(rng_stream)
    return [make_stream(seed, 0)], (seed, 0)


def run_tail_averaged(model: DataModel, hp: HyperParams, w0, s: int, N: int,
                      rng_stream) -> tuple[np.ndarray, PathRisk]:
    """Run s + N steps and average the last N iterates.

    ``rng_stream`` is an integer seed or a numpy Generator.  The returned
    PathRisk carries the coupled bias/variance decomposition of the same
    stream alongside the full-path excess risk.
    """
    if s < 0 or N < 1:
        raise ValidationError("need s >= 0 and N >= 1")
    gens, seed = _as_gens(rng_stream)
    wb_full, wb_bias, wb_var = (a[0] for a in _run_batch(model, hp, np.asarray(w0, float), s, N, gens))
    return wb_full, _risks_from_averages(model.instance, wb_full, wb_bias, wb_var, seed)


def run_decomposed(model: DataModel, hp: HyperParams, w0, s: int, N: int,
                   rng_stream) -> PathRisk:
    """Coupled full/bias/variance paths on one sample stream."""
    _, risk = run_tail_averaged(model, hp, w0, s, N, rng_stream)
    return risk


def decomposition_residual(model: DataModel, hp: HyperParams, w0, s: int, N: int,
                           rng_stream) -> float:
    """Max-abs of (full - bias - var) centered tail averages (linearity check)."""
    gens, _ = _as_gens(rng_stream)
    wb_full, wb_bias, wb_var = (a[0] for a in _run_batch(model, hp, np.asarray(w0, float), s, N, gens))
    wstar = model.instance.w_star
    resid = (wb_full - wstar) - (wb_bias - wstar) - (wb_var - wstar)
    return float(np.max(np.abs(resid)))


def _mean_stderr(vals: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(vals))
    if vals.size < 2:
        return mean, 0.0
    return mean, float(np.std(vals, ddof=1) / math.sqrt(vals.size))


def monte_carlo(model: DataModel, hp: HyperParams, w0, s: int, N: int,
                reps: int, base_seed: int, batch: int = 64) -> MonteCarloResult:
    """Independent repetitions with streams keyed (base_seed, rep).

    Batching is an internal speed knob: per-rep results are bit-identical
    for any batch size because every repetition owns its generator and the
    batched updates are row-independent.
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    inst = model.instance
    # keep per-batch scratch (3 paths x 4 arrays + chunk draws) around 100 MB
    per_rep_bytes = 8 * inst.d * (12 + 2 * _TIME_CHUNK)
    batch = max(1, min(batch, reps, int(1.2e8 / per_rep_bytes) or 1))
    w0 = np.asarray(w0, dtype=float)
    per_rep: list[PathRisk] = []
    for lo in range(0, reps, batch):
        hi = min(lo + batch, reps)
        gens = [make_stream(base_seed, rep) for rep in range(lo, hi)]
        wb_full, wb_bias, wb_var = _run_batch(model, hp, w0, s, N, gens)
        for j, rep in enumerate(range(lo, hi)):
            per_rep.append(_risks_from_averages(
                inst, wb_full[j], wb_bias[j], wb_var[j], (base_seed, rep)))
    risks = np.array([p.excess_risk for p in per_rep])
    biases = np.array([p.bias_part for p in per_rep])
    variances = np.array([p.variance_part for p in per_rep])
    mean, stderr = _mean_stderr(risks)
    mean_b, stderr_b = _mean_stderr(biases)
    mean_v, stderr_v = _mean_stderr(variances)
    return MonteCarloResult(mean, stderr, per_rep, reps > 1,
                            mean_b, mean_v, stderr_b, stderr_v)
