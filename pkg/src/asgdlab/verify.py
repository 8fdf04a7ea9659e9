"""Self-contained property suites behind the ``verify`` CLI subcommand.

Each check is a named function returning a :class:`CheckResult`; a failing
check carries a JSON-serializable payload of the offending instance so it
can be replayed.  The ``fast`` level trims sizes to keep the whole run well
under a minute; ``full`` additionally runs the d = 2000 reference presets.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import blockdyn, oracle
from . import bounds as bounds_mod
from .dense import dense_risk
from .errors import ValidationError
from .hyper import (HyperParams, bound_constants, complex_window,
                    compute_cutoffs, derive_from_alpha, derive_overparam)
from .oracle import FourthMomentModel, exact_risk, stationary_check
from .simulate import DataModel, make_stream, monte_carlo
from .spectrum import ProblemInstance, Spectrum, make_spectrum, tail_sum

__all__ = ["CheckResult", "run_checks", "sample_overparam", "sample_problem"]


@dataclass
class CheckResult:
    name: str
    ok: bool
    seconds: float
    detail: str = ""
    payload: dict | None = None


def sample_overparam(rng: np.random.Generator, d_max: int = 50, psi: float = 3.0,
                     max_ratio: float = 50.0) -> tuple[Spectrum, HyperParams]:
    """Random spectrum plus valid overparameterized hyperparameters.

    ``max_ratio`` caps gamma/delta; float64-vs-float64 comparisons of the
    tail-averaged second moment lose digits like (1-c)^{-2}, so equivalence
    checks sample with a moderate cap while bound checks use the full range.
    """
    d = int(rng.integers(3, d_max + 1))
    kind = int(rng.integers(0, 3))
    if kind == 0:
        lam = np.sort(rng.uniform(0.02, 1.0, d))[::-1]
    elif kind == 1:
        lam = np.arange(1, d + 1, dtype=float) ** -rng.uniform(1.2, 3.0)
    else:
        lam = np.exp(-rng.uniform(0.2, 1.0) * np.arange(1, d + 1))
    sp = Spectrum(lam)
    kt = int(rng.integers(1, min(8, d) + 1))
    delta = rng.uniform(0.2, 1.0) / (2.0 * psi * sp.trace())
    tail = tail_sum(sp, kt)
    cap = 1.0 / (2.0 * psi * tail) if tail > 0 else max_ratio * delta
    gamma = rng.uniform(delta, min(cap, max_ratio * delta))
    return sp, derive_overparam(delta, gamma, kt, psi, sp)


def sample_problem(rng: np.random.Generator, d_max: int = 50, psi: float = 3.0,
                   max_ratio: float = 50.0) -> tuple[ProblemInstance, HyperParams, int, int]:
    sp, hp = sample_overparam(rng, d_max, psi, max_ratio)
    d = sp.d
    N = int(math.ceil(2.0 / (1.0 - hp.c))) + int(rng.integers(10, 200))
    s = int(rng.integers(0, 150))
    w0 = rng.normal(size=d) * rng.uniform(0.2, 3.0)
    wstar = rng.normal(size=d) * 0.5
    inst = ProblemInstance(sp, wstar, w0, float(rng.uniform(0.0, 1.0)), psi)
    return inst, hp, s, N


def _hp_payload(hp: HyperParams) -> dict:
    return {"alpha": hp.alpha, "beta": hp.beta, "gamma": hp.gamma,
            "delta": hp.delta, "psi": hp.psi, "kappa_tilde": hp.kappa_tilde,
            "regime": hp.regime}


def _payload(sp: Spectrum, hp: HyperParams, **extra) -> dict:
    out = {"eigenvalues": sp.eigenvalues.tolist(), "hp": _hp_payload(hp)}
    out.update(extra)
    return out


def _sample_lam_by_segment(rng, hp: HyperParams, lam_max: float, segment: str) -> float | None:
    """A lambda inside one dynamical segment, or None if the window is empty."""
    thr_lo, thr_hi = complex_window(hp)
    khat_thr = (1.0 - hp.c) / hp.delta if hp.delta > 0 else math.inf
    windows = {
        "real_large": (thr_hi, lam_max),
        "mid_upper": (khat_thr, min(thr_hi, lam_max)),
        "mid_lower": (thr_lo, min(khat_thr, lam_max)),
        "real_small": (1e-6 * thr_lo, thr_lo),
    }
    lo, hi = windows[segment]
    if not (lo < hi):
        return None
    return float(rng.uniform(lo, hi))


def check_identities(level: str, seed: int = 1) -> CheckResult:
    """Parameter identities and the root sum/product algebra."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    n = 10_000 if level == "full" else 2_000
    for trial in range(n):
        sp, hp = sample_overparam(rng, d_max=12)
        c, q, delta, gamma = hp.c, hp.q, hp.delta, hp.gamma
        checks = [
            ("c = 2*alpha - 1", c, 2.0 * hp.alpha - 1.0),
            ("(q - c*delta)/(1-c) = (gamma+delta)/2",
             (q - c * delta) / (1.0 - c), (gamma + delta) / 2.0),
            ("(q - delta)/(1-c) = (gamma-delta)/2",
             (q - delta) / (1.0 - c), (gamma - delta) / 2.0),
        ]
        for name, a, b in checks:
            if abs(a - b) > 1e-12 * max(1.0, abs(a), abs(b)):
                return CheckResult("identities", False, time.time() - t0,
                                   f"{name}: {a} vs {b}", _payload(sp, hp))
        ineqs = [
            ("beta <= 1-c", hp.beta <= (1.0 - c) * (1 + 1e-12)),
            ("1-c <= 2*beta", 1.0 - c <= 2.0 * hp.beta * (1 + 1e-12)),
            ("delta <= q", delta <= q * (1 + 1e-12)),
            ("q <= (1+c)*delta", q <= (1.0 + c) * delta * (1 + 1e-12)),
            ("q-delta <= c*(q-c*delta)", q - delta <= c * (q - c * delta) + 1e-15),
        ]
        for name, ok in ineqs:
            if not ok:
                return CheckResult("identities", False, time.time() - t0,
                                   name, _payload(sp, hp))
        lam = float(rng.uniform(1e-4, 1.0) * sp.eigenvalues[0])
        pair = blockdyn.eigenpair(lam, hp)
        x1, x2 = pair.x1, pair.x2
        veda = [
            ("(1-x1)(1-x2) = (q-c*delta)*lam", (1 - x1) * (1 - x2), (q - c * delta) * lam),
            ("(c-x1)(c-x2) = c*(q-delta)*lam", (c - x1) * (c - x2), c * (q - delta) * lam),
            ("(1+x1)(1+x2) = 2(1+c)-(q+c*delta)*lam",
             (1 + x1) * (1 + x2), 2 * (1 + c) - (q + c * delta) * lam),
            ("(c*delta-q*x1)(c*delta-q*x2) = c(q-delta)(q-c*delta)",
             (c * delta - q * x1) * (c * delta - q * x2), c * (q - delta) * (q - c * delta)),
            ("x1+x2 = 1+c-q*lam", x1 + x2, 1 + c - q * lam),
            ("x1*x2 = c*(1-delta*lam)", x1 * x2, c * (1 - delta * lam)),
        ]
        for name, a, b in veda:
            if abs(a - b) > 1e-12 * max(1.0, abs(a), abs(b)):
                return CheckResult("identities", False, time.time() - t0,
                                   f"{name}: {a} vs {b}", _payload(sp, hp, lam=lam))
    return CheckResult("identities", True, time.time() - t0, f"{n} instances")


def check_closed_form_powers(level: str, seed: int = 2) -> CheckResult:
    """Closed-form block powers against repeated multiplication."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    pairs = 500 if level == "full" else 120
    kmax = 200 if level == "full" else 60
    for trial in range(pairs):
        sp, hp = sample_overparam(rng, d_max=10)
        lam = float(rng.uniform(1e-4, 1.0) * sp.eigenvalues[0])
        m = blockdyn.block(lam, hp).m
        acc = np.eye(2)
        for k in range(1, kmax + 1):
            acc = acc @ m
            closed = blockdyn.power_closed(lam, hp, k)
            err = float(np.max(np.abs(acc - closed)))
            if err > 1e-9:
                return CheckResult("closed_form_powers", False, time.time() - t0,
                                   f"k={k} err={err}", _payload(sp, hp, lam=lam, k=k))
    return CheckResult("closed_form_powers", True, time.time() - t0,
                       f"{pairs} pairs, k<= {kmax}")


def check_spectral_brackets(level: str, seed: int = 3) -> CheckResult:
    """Root brackets per regime, complex magnitude, and stability |x2| < 1."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    n = 4_000 if level == "full" else 1_000
    for trial in range(n):
        sp, hp = sample_overparam(rng, d_max=12)
        c, q, delta, gamma = hp.c, hp.q, hp.delta, hp.gamma
        for segment in ("real_large", "mid_upper", "mid_lower", "real_small"):
            lam = _sample_lam_by_segment(rng, hp, float(sp.eigenvalues[0]), segment)
            if lam is None or lam <= 0:
                continue
            pair = blockdyn.eigenpair(lam, hp)
            x2 = pair.x2
            payload = _payload(sp, hp, lam=lam, segment=segment)
            if lam <= sp.eigenvalues[0] and abs(x2) >= 1.0:
                return CheckResult("spectral_brackets", False, time.time() - t0,
                                   f"|x2|={abs(x2)} >= 1", payload)
            if segment == "real_large":
                lo = (c * delta - math.sqrt(c * (q - delta) * (q - c * delta))) / q
                hi = c * delta / q
                if not (lo - 1e-10 <= x2.real <= hi + 1e-10):
                    return CheckResult("spectral_brackets", False, time.time() - t0,
                                       f"x2={x2.real} outside [{lo}, {hi}]", payload)
            elif segment in ("mid_upper", "mid_lower"):
                want = math.sqrt(c * (1.0 - delta * lam))
                if abs(abs(x2) - want) > 1e-12 * max(1.0, want):
                    return CheckResult("spectral_brackets", False, time.time() - t0,
                                       f"|x2|={abs(x2)} != {want}", payload)
            else:
                lo = 1.0 - (gamma + delta) * lam
                hi = 1.0 - (gamma + delta) * lam / 2.0
                if not (lo - 1e-10 <= x2.real <= hi + 1e-10):
                    return CheckResult("spectral_brackets", False, time.time() - t0,
                                       f"x2={x2.real} outside [{lo}, {hi}]", payload)
    return CheckResult("spectral_brackets", True, time.time() - t0, f"{n} instances")


def check_partial_sum_lemmas(level: str, seed: int = 4) -> CheckResult:
    """Magnitude bounds on the geometric partial sums, per regime."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    n = 800 if level == "full" else 250
    for trial in range(n):
        sp, hp = sample_overparam(rng, d_max=12)
        c, q, delta = hp.c, hp.q, hp.delta
        rho = (q - c * delta) / (1.0 - c)
        j = int(rng.integers(0, 40))
        t = int(rng.integers(1, 80))
        for segment in ("real_large", "mid_upper", "mid_lower", "real_small"):
            lam = _sample_lam_by_segment(rng, hp, float(sp.eigenvalues[0]), segment)
            if lam is None or lam <= 0:
                continue
            payload = _payload(sp, hp, lam=lam, segment=segment, j=j, t=t)
            s1 = blockdyn.partial_sum_vec(lam, hp, j, t, "deltaq")[0]
            s2 = blockdyn.partial_sum_vec(lam, hp, j, t, "ones")[0]
            osc = c * (1.0 - delta * lam)
            tol = 1e-9
            if segment == "real_large":
                b1 = 2.0 / lam * (c * delta / q) ** j
                ok1 = -b1 - tol <= s1 <= b1 + tol
                ok2 = (-4.0 / (delta * lam) * (c * delta / q) ** j - tol <= s2
                       <= 2.0 / (delta * lam) * (c * delta / q) ** j + tol)
            elif segment == "mid_upper":
                b1 = 3.0 / lam * osc ** (j / 2.0) + delta * j * osc ** ((j - 1) / 2.0)
                b2 = (2.0 * j + 4.0 / (delta * lam)) * osc ** (j / 2.0)
                ok1, ok2 = abs(s1) <= b1 + tol, abs(s2) <= b2 + tol
            elif segment == "mid_lower":
                b1 = (3.0 / lam * osc ** (j / 2.0)
                      + (1.0 - c) / lam * j * osc ** ((j - 1) / 2.0))
                b2 = (2.0 * j + 10.0 / (1.0 - c)) * osc ** (j / 2.0)
                ok1, ok2 = abs(s1) <= b1 + tol, abs(s2) <= b2 + tol
            else:
                damp = 1.0 - (1.0 - 2.0 * rho * lam) ** t
                b1 = 3.0 / lam * damp * (1.0 - rho * lam) ** j
                b2 = 3.0 * (1.0 - c) / ((q - c * delta) * lam) * damp * (1.0 - rho * lam) ** j
                ok1 = -tol <= s1 <= b1 + tol
                ok2 = -tol <= s2 <= b2 + tol
            if not (ok1 and ok2):
                return CheckResult("partial_sum_lemmas", False, time.time() - t0,
                                   f"s1={s1} s2={s2}", payload)
            # squared-sum bound on the second component of A^k [1,1]
            vec = np.array([1.0, 1.0])
            m = blockdyn.block(lam, hp).m
            acc = 0.0
            w = vec.copy()
            for _ in range(t):
                acc += w[1] ** 2
                w = m @ w
            caps = {"real_large": 3.5 / (delta * lam),
                    "mid_upper": 14.0 / (delta * lam),
                    "mid_lower": 10.0 / (1.0 - c),
                    "real_small": (1.0 - c) / ((q - c * delta) * lam)
                    * (1.0 - (1.0 - 2.0 * rho * lam) ** (2 * t))}
            if acc > caps[segment] + tol:
                return CheckResult("partial_sum_lemmas", False, time.time() - t0,
                                   f"sq-sum {acc} > {caps[segment]}", payload)
    return CheckResult("partial_sum_lemmas", True, time.time() - t0, f"{n} instances")


def check_dense_oracle(level: str, seed: int = 5) -> CheckResult:
    """Per-coordinate second-moment recursion against the dense reference."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    trials = 20 if level == "full" else 6
    steps = 200 if level == "full" else 60
    for trial in range(trials):
        inst, hp, _, _ = sample_problem(rng, d_max=8, max_ratio=15.0)
        s = int(rng.integers(0, steps // 2))
        N = int(rng.integers(1, steps - s))
        for kind in ("gaussian", "onehot", "meanfield"):
            fm = FourthMomentModel(kind)
            for mode in ("full", "bias", "variance"):
                ours = exact_risk(inst, hp, fm, s, N, mode).total
                ref = dense_risk(inst, hp, kind, s, N, mode)
                rel = abs(ours - ref) / max(abs(ref), 1e-300)
                if ref != 0 and rel > 1e-10:
                    return CheckResult(
                        "dense_oracle", False, time.time() - t0,
                        f"{kind}/{mode}: rel={rel}",
                        _payload(inst.spectrum, hp, s=s, N=N, kind=kind, mode=mode))
    return CheckResult("dense_oracle", True, time.time() - t0,
                       f"{trials} instances x 3 kinds x 3 modes")


def check_bound_dominance(level: str, seed: int = 6) -> CheckResult:
    """Certified bounds dominate the exact Gaussian risk, component-wise."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    trials = 50 if level == "full" else 10
    fm = FourthMomentModel("gaussian")
    for trial in range(trials):
        inst, hp, s, N = sample_problem(rng, d_max=50)
        ob = exact_risk(inst, hp, fm, s, N, "bias").bias
        ov = exact_risk(inst, hp, fm, s, N, "variance").variance
        ot = exact_risk(inst, hp, fm, s, N, "full").total
        for variant in ("appendix", "main"):
            rep = bounds_mod.asgd_bound(inst, hp, s, N, variant=variant)
            if not (2.0 * rep.effective_bias >= ob and 2.0 * rep.effective_variance >= ov
                    and rep.total >= ot):
                return CheckResult(
                    "bound_dominance", False, time.time() - t0,
                    f"variant={variant} EB2={2*rep.effective_bias} vs {ob}; "
                    f"EV2={2*rep.effective_variance} vs {ov}; total={rep.total} vs {ot}",
                    _payload(inst.spectrum, hp, s=s, N=N, variant=variant))
    return CheckResult("bound_dominance", True, time.time() - t0, f"{trials} instances")


def check_mc_oracle(level: str, seed: int = 7) -> CheckResult:
    """Monte Carlo mean within 4 standard errors of the exact oracle."""
    t0 = time.time()
    d, s, N, reps = (100, 200, 200, 2000) if level == "full" else (30, 60, 60, 500)
    sp = make_spectrum("polynomial", d, exponent=2.0)
    hp = derive_from_alpha(0.1, 0.9875, 5, 3.0, sp)
    w0 = np.zeros(d)
    w0[min(19, d - 1)] = 10.0
    inst = ProblemInstance(sp, np.zeros(d), w0, 0.01, 3.0)
    model = DataModel("gaussian", inst)
    mc = monte_carlo(model, hp, w0, s, N, reps, base_seed=seed)
    orc = exact_risk(inst, hp, FourthMomentModel("gaussian"), s, N, "full")
    for name, m, se, o in (("full", mc.mean, mc.stderr, orc.total),
                           ("bias", mc.mean_bias, mc.stderr_bias, orc.bias),
                           ("variance", mc.mean_variance, mc.stderr_variance, orc.variance)):
        if abs(m - o) > 4.0 * se:
            return CheckResult("mc_oracle", False, time.time() - t0,
                               f"{name}: |{m} - {o}| > 4*{se}",
                               _payload(sp, hp, mode=name, s=s, N=N, reps=reps))
    return CheckResult("mc_oracle", True, time.time() - t0,
                       f"d={d} reps={reps}; all modes within 4 stderr")


def check_reductions(level: str, seed: int = 8) -> CheckResult:
    """delta = gamma collapses onto SGD; delta = 0 onto heavy ball."""
    from .hyper import derive_overparam, derive_shb

    t0 = time.time()
    rng = np.random.default_rng(seed)
    d, steps = 12, 1000
    lam = np.arange(1, d + 1, dtype=float) ** -2.0
    sp = Spectrum(lam)
    w0 = rng.normal(size=d)
    wstar = rng.normal(size=d) * 0.2
    inst = ProblemInstance(sp, wstar, w0, 0.04, 3.0)
    model = DataModel("gaussian", inst)

    # pre-draw one stream the references consume identically
    gen = make_stream(seed, 0)
    xs = np.sqrt(lam) * gen.standard_normal((steps, d))
    eps = math.sqrt(inst.noise_variance) * gen.standard_normal(steps)
    ys = xs @ wstar + eps

    hp_sgd = derive_overparam(0.1, 0.1, 3, 3.0, sp)
    w = w0.copy()
    v = w0.copy()
    ref = w0.copy()
    worst = 0.0
    for t in range(steps):
        x, y = xs[t], ys[t]
        u = w + (1.0 - hp_sgd.alpha) * (v - w)
        g = (y - u @ x) * x
        w, v = u + hp_sgd.delta * g, v + hp_sgd.beta * (u - v) + hp_sgd.gamma * g
        ref = ref + hp_sgd.delta * (y - ref @ x) * x
        worst = max(worst, float(np.max(np.abs(w - ref))))
    if worst > 1e-12:
        return CheckResult("reductions", False, time.time() - t0,
                           f"SGD reduction drift {worst}", None)

    hp_shb = derive_shb(0.9, 0.05 * 4.0 / (3.0 * sp.trace()) * 3.0, sp, 3.0, 200)
    w = w0.copy()
    v = w0.copy()
    h_prev = w0.copy()
    h_cur = w0.copy()
    worst = 0.0
    for t in range(steps):
        x, y = xs[t], ys[t]
        u = w + (1.0 - hp_shb.alpha) * (v - w)
        g = (y - u @ x) * x
        w, v = u + hp_shb.delta * g, v + hp_shb.beta * (u - v) + hp_shb.gamma * g
        gh = (y - h_cur @ x) * x
        h_new = h_cur + hp_shb.q * gh + hp_shb.c * (h_cur - h_prev)
        h_prev, h_cur = h_cur, h_new
        # the w-path trails the two-term recursion by one step
        worst = max(worst, float(np.max(np.abs(w - h_prev))))
    if worst > 1e-12:
        return CheckResult("reductions", False, time.time() - t0,
                           f"heavy-ball reduction drift {worst}", None)
    return CheckResult("reductions", True, time.time() - t0, f"{steps} steps each")


def check_stationary(level: str, seed: int = 9) -> CheckResult:
    d = 50 if level == "fast" else 100
    t0 = time.time()
    sp = make_spectrum("polynomial", d, exponent=2.0)
    hp = derive_from_alpha(0.1, 0.9875, 5, 3.0, sp)
    inst = ProblemInstance(sp, np.zeros(d), np.zeros(d), 0.01, 3.0)
    diag = stationary_check(inst, hp, FourthMomentModel("gaussian"))
    ok = diag.converged and diag.ok and diag.monotone
    return CheckResult("stationary", ok, time.time() - t0,
                       f"steps={diag.steps} value={diag.value_exact:.6g} "
                       f"bound={diag.bound:.6g}",
                       None if ok else {"diag": str(diag)})


def check_paper_instance(level: str, seed: int = 10) -> CheckResult:
    """d = 2000 reference configuration: cutoffs and oracle risk orderings."""
    t0 = time.time()
    sp = make_spectrum("polynomial", 2000, exponent=2.0)
    hp = derive_from_alpha(0.1, 0.9875, 5, 3.0, sp)
    cuts = compute_cutoffs(sp, hp, 500)
    expect = (0, 2, 6, 17)
    got = (cuts.k_ddagger, cuts.k_hat, cuts.k_dagger, cuts.k_star)
    if got != expect:
        return CheckResult("paper_instance", False, time.time() - t0,
                           f"cutoffs {got} != {expect}", None)
    fm = FourthMomentModel("gaussian")
    hp_sgd = derive_overparam(0.1, 0.1, 5, 3.0, sp)
    risks = {}
    for idx in (1, 20):
        w0 = np.zeros(2000)
        w0[idx - 1] = 10.0
        inst = ProblemInstance(sp, np.zeros(2000), w0, 0.01, 3.0)
        ra = exact_risk(inst, hp, fm, 500, 500, "full").total
        rs = exact_risk(inst, hp_sgd, fm, 500, 500, "full").total
        risks[idx] = (ra, rs)
    ok = risks[20][0] < risks[20][1] and risks[1][0] > risks[1][1]
    return CheckResult("paper_instance", ok, time.time() - t0,
                       f"risk orderings {risks}", None if ok else {"risks": str(risks)})


FAST_CHECKS = [check_identities, check_closed_form_powers, check_spectral_brackets,
               check_partial_sum_lemmas, check_dense_oracle, check_bound_dominance,
               check_mc_oracle, check_reductions, check_stationary]
FULL_CHECKS = FAST_CHECKS + [check_paper_instance]


def run_checks(level: str = "fast") -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValidationError("verify level must be 'fast' or 'full'")
    checks = FULL_CHECKS if level == "full" else FAST_CHECKS
    return [fn(level) for fn in checks]


def print_report(results: list[CheckResult]) -> bool:
    width = max(len(r.name) for r in results)
    all_ok = True
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"[{status}] {r.name:<{width}}  {r.seconds:7.2f}s  {r.detail}")
        if not r.ok:
            all_ok = False
            if r.payload is not None:
                print("  failing instance (replay payload):")
                print("  " + json.dumps(r.payload))
    print(("all checks passed" if all_ok else "FAILURES detected"))
    return all_ok
