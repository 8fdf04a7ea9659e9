"""Command-line front end: presets, CSV emission, verification driver.

Output CSVs are self-describing: a ``#``-prefixed header block embeds the
full resolved configuration, then one row per (engine, algorithm, s, rep)
cell.  Floats are printed with 17 significant digits so files round-trip
exactly; byte-identical output for a fixed (config, seed) is guaranteed
modulo the wall_time_ms column.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .bounds import (asgd_bound, classical_bound, compare_report, onehot_bound,
                     sgd_bound, shb_bound)
from .config import (ExperimentConfig, build_hyper, build_instance,
                     build_spectrum, load_config, resolve_w0, serialize_config)
from .errors import ValidationError
from .hyper import bound_constants, compute_cutoffs, derive_overparam
from .blockdyn import decay_rate
from .oracle import FourthMomentModel, exact_risk
from .presets import FIGURE_PRESETS, figure_preset
from .simulate import DataModel, monte_carlo
from .spectrum import tail_sum
from .verify import print_report, run_checks

__all__ = ["main"]

_F = "%.17g"

RESULT_COLUMNS = ("engine", "algorithm", "s", "N", "rep",
                  "excess_risk", "bias", "variance", "stderr", "wall_time_ms")


def _fmt(x) -> str:
    if isinstance(x, float):
        return _F % x
    return str(x)


def _write_csv(path: str, cfg: ExperimentConfig, rows: list[dict]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in serialize_config(cfg).splitlines():
            fh.write(f"# {line}\n")
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(col, "")) for col in RESULT_COLUMNS) + "\n")


def _write_table_csv(path: str, cfg: ExperimentConfig, columns: tuple,
                     rows: list[dict], extra_header: dict | None = None) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in serialize_config(cfg).splitlines():
            fh.write(f"# {line}\n")
        for key, val in (extra_header or {}).items():
            fh.write(f"# {key} = {_fmt(val)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(col, "")) for col in columns) + "\n")


def _sgd_delta(cfg: ExperimentConfig) -> float:
    return cfg.sgd_delta if cfg.sgd_delta > 0 else cfg.delta


def _hyper_for(cfg: ExperimentConfig, spectrum, algorithm: str):
    if algorithm == "sgd":
        # the delta = gamma specialization reproduces plain SGD exactly
        return derive_overparam(_sgd_delta(cfg), _sgd_delta(cfg),
                                max(cfg.kappa_tilde, 1), cfg.psi, spectrum)
    return build_hyper(cfg, spectrum)


def _fourth_moment(cfg: ExperimentConfig) -> FourthMomentModel:
    return FourthMomentModel("gaussian" if cfg.data_model == "gaussian" else "onehot")


def _run_cells(cells: list[tuple], worker, threads: int) -> list:
    """Evaluate keyed cells with a bounded pool; assembly is key-sorted."""
    if threads <= 1 or len(cells) <= 1:
        results = {key: worker(key) for key in cells}
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(cells, pool.map(worker, cells)))
    out = []
    for key in sorted(results):
        out.extend(results[key])
    return out


# ---------------------------------------------------------------- subcommands

def cmd_cutoffs(cfg: ExperimentConfig, args) -> int:
    spectrum = build_spectrum(cfg)
    hp = build_hyper(cfg, spectrum)
    cuts = compute_cutoffs(spectrum, hp, cfg.N, sgd_delta=_sgd_delta(cfg))
    bc = bound_constants(spectrum, hp)
    print(f"regime={hp.regime}  d={spectrum.d}  trace={spectrum.trace():.12g}")
    print(f"alpha={hp.alpha:.12g} beta={hp.beta:.12g} gamma={hp.gamma:.12g} "
          f"delta={hp.delta:.12g}")
    print(f"c={hp.c:.12g} q={hp.q:.12g}  l={bc.l:.12g} r={bc.r:.12g}")
    print(f"k_ddagger={cuts.k_ddagger} k_hat={cuts.k_hat} k_dagger={cuts.k_dagger} "
          f"k_star={cuts.k_star} k_star_sgd={cuts.k_star_sgd}")
    sd = _sgd_delta(cfg)
    n_rows = min(spectrum.d, args.max_rows)
    print(f"{'i':>5} {'lambda':>14} {'asgd_base':>12} {'sgd_base':>12}")
    rows = []
    for i in range(n_rows):
        lam = float(spectrum.eigenvalues[i])
        a = decay_rate(lam, hp)
        g = 1.0 - sd * lam
        winner = "tie" if abs(a - g) <= 1e-12 else ("asgd" if a < g else "sgd")
        print(f"{i+1:>5} {lam:>14.6g} {a:>12.8f} {g:>12.8f}  {winner}")
        rows.append({"index": i + 1, "lambda": lam, "asgd_base": a,
                     "sgd_base": g, "winner": winner})
    if args.out:
        path = os.path.join(args.out, "decay_table.csv")
        _write_table_csv(path, cfg, ("index", "lambda", "asgd_base", "sgd_base", "winner"),
                         rows, extra_header={"k_hat": cuts.k_hat})
        print(f"wrote {path}")
    return 0


_BOUND_EVALS = {
    "asgd": lambda inst, cfg, hp, s: asgd_bound(inst, hp, s, cfg.N, variant=cfg.variant),
    "sgd": lambda inst, cfg, hp, s: sgd_bound(inst, _sgd_delta(cfg), cfg.psi, s, cfg.N),
    "shb": lambda inst, cfg, hp, s: shb_bound(inst, hp, s, cfg.N, variant=cfg.variant),
    "classical": lambda inst, cfg, hp, s: classical_bound(inst, cfg.psi, s, cfg.N,
                                                          variant=cfg.variant),
    "onehot": lambda inst, cfg, hp, s: onehot_bound(inst, hp, s, cfg.N,
                                                    variant=cfg.variant),
}


def cmd_bound(cfg: ExperimentConfig, args) -> int:
    spectrum = build_spectrum(cfg)
    inst = build_instance(cfg, spectrum)
    rows = []
    for algo in cfg.algorithms:
        if algo not in _BOUND_EVALS:
            raise ValidationError(f"no bound evaluator for algorithm {algo!r}")
        hp = _hyper_for(cfg, spectrum, algo) if algo not in ("classical",) else None
        for s in cfg.s_list:
            t0 = time.perf_counter()
            rep = _BOUND_EVALS[algo](inst, cfg, hp, s)
            ms = (time.perf_counter() - t0) * 1e3
            rows.append({"engine": "bound", "algorithm": algo, "s": s, "N": cfg.N,
                         "rep": "", "excess_risk": rep.total, "bias": rep.effective_bias,
                         "variance": rep.effective_variance, "stderr": 0.0,
                         "wall_time_ms": ms})
            print(f"bound {algo} s={s}: total={rep.total:.8g} "
                  f"EB={rep.effective_bias:.8g} EV={rep.effective_variance:.8g}")
    if args.out:
        path = os.path.join(args.out, "bounds.csv")
        _write_csv(path, cfg, rows)
        print(f"wrote {path}")
    return 0


def _oracle_rows(cfg: ExperimentConfig, spectrum, inst, algo: str) -> list[dict]:
    hp = _hyper_for(cfg, spectrum, algo)
    fm = _fourth_moment(cfg)
    out = []
    for s in cfg.s_list:
        t0 = time.perf_counter()
        rb = exact_risk(inst, hp, fm, s, cfg.N, "full")
        ms = (time.perf_counter() - t0) * 1e3
        out.append({"engine": "oracle", "algorithm": algo, "s": s, "N": cfg.N,
                    "rep": "", "excess_risk": rb.total, "bias": rb.bias,
                    "variance": rb.variance, "stderr": 0.0, "wall_time_ms": ms})
    return out


def _montecarlo_rows(cfg: ExperimentConfig, spectrum, inst, algo: str) -> list[dict]:
    hp = _hyper_for(cfg, spectrum, algo)
    model = DataModel(cfg.data_model, inst)
    w0 = resolve_w0(cfg.w0, spectrum.d)
    out = []
    for s in cfg.s_list:
        t0 = time.perf_counter()
        # stream seed depends on (seed, s) but not the algorithm, so paired
        # algorithm comparisons share their sample paths
        res = monte_carlo(model, hp, w0, s, cfg.N, cfg.reps,
                          base_seed=cfg.seed + 7919 * s)
        ms = (time.perf_counter() - t0) * 1e3
        for i, pr in enumerate(res.per_rep):
            out.append({"engine": "montecarlo", "algorithm": algo, "s": s, "N": cfg.N,
                        "rep": i, "excess_risk": pr.excess_risk, "bias": pr.bias_part,
                        "variance": pr.variance_part, "stderr": 0.0, "wall_time_ms": 0.0})
        out.append({"engine": "montecarlo", "algorithm": algo, "s": s, "N": cfg.N,
                    "rep": "mean", "excess_risk": res.mean, "bias": res.mean_bias,
                    "variance": res.mean_variance, "stderr": res.stderr,
                    "wall_time_ms": ms})
    return out


def _experiment_rows(cfg: ExperimentConfig, engines) -> list[dict]:
    spectrum = build_spectrum(cfg)
    inst = build_instance(cfg, spectrum)
    cells = [(engine, algo) for engine in engines for algo in cfg.algorithms]

    def worker(cell):
        engine, algo = cell
        if engine == "oracle":
            return _oracle_rows(cfg, spectrum, inst, algo)
        if engine == "montecarlo":
            return _montecarlo_rows(cfg, spectrum, inst, algo)
        if engine == "bound":
            hp = _hyper_for(cfg, spectrum, algo) if algo != "classical" else None
            rows = []
            for s in cfg.s_list:
                rep = _BOUND_EVALS[algo](inst, cfg, hp, s)
                rows.append({"engine": "bound", "algorithm": algo, "s": s, "N": cfg.N,
                             "rep": "", "excess_risk": rep.total,
                             "bias": rep.effective_bias,
                             "variance": rep.effective_variance, "stderr": 0.0,
                             "wall_time_ms": 0.0})
            return rows
        raise ValidationError(f"unknown engine {engine!r}")

    return _run_cells(cells, worker, cfg.threads)


def cmd_oracle(cfg: ExperimentConfig, args) -> int:
    rows = _experiment_rows(cfg, ("oracle",))
    path = os.path.join(args.out or cfg.out, "oracle.csv")
    _write_csv(path, cfg, rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    rows = _experiment_rows(cfg, ("montecarlo",))
    path = os.path.join(args.out or cfg.out, "montecarlo.csv")
    _write_csv(path, cfg, rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    spectrum = build_spectrum(cfg)
    inst = build_instance(cfg, spectrum)
    hp = build_hyper(cfg, spectrum)
    s = cfg.s_list[-1]
    rep = compare_report(inst, hp, _sgd_delta(cfg), s, cfg.N,
                         max_rows=args.max_rows, variant=cfg.variant)
    print(f"k_hat={rep.k_hat}  asgd_total={rep.asgd_total:.8g} "
          f"sgd_total={rep.sgd_total:.8g}  (s={s}, N={cfg.N})")
    print(f"{'i':>5} {'lambda':>14} {'asgd_base':>12} {'sgd_base':>12}  winner")
    for row in rep.rows:
        print(f"{row.index:>5} {row.lam:>14.6g} {row.asgd_base:>12.8f} "
              f"{row.sgd_base:>12.8f}  {row.winner}")
    if args.out:
        rows = [{"index": r.index, "lambda": r.lam, "asgd_base": r.asgd_base,
                 "sgd_base": r.sgd_base, "winner": r.winner} for r in rep.rows]
        path = os.path.join(args.out, "compare.csv")
        _write_table_csv(path, cfg, ("index", "lambda", "asgd_base", "sgd_base", "winner"),
                         rows, extra_header={"k_hat": rep.k_hat,
                                             "asgd_total": rep.asgd_total,
                                             "sgd_total": rep.sgd_total})
        print(f"wrote {path}")
    return 0


def cmd_figure(cfg_overrides, args) -> int:
    jobs = figure_preset(args.preset)
    out_dir = args.out or "results"
    for panel, cfg, panels in jobs:
        cfg = _apply_overrides(cfg, args)
        rows = _experiment_rows(cfg, cfg.engines)
        path = os.path.join(out_dir, f"{panel}.csv")
        _write_csv(path, cfg, rows)
        print(f"wrote {path} ({len(rows)} rows; panels: {','.join(panels)})")
    return 0


def cmd_sweep_kappa(cfg: ExperimentConfig, args) -> int:
    spectrum = build_spectrum(cfg)
    inst = build_instance(cfg, spectrum)
    kappas = [int(k) for k in args.kappas.split(",")]
    columns = ("kappa_tilde", "status", "gamma", "beta", "c", "q", "k_ddagger",
               "k_hat", "k_dagger", "k_star", "l", "r", "bound_total")
    rows = []
    s = cfg.s_list[-1]
    for kt in kappas:
        row = {"kappa_tilde": kt}
        try:
            if kt < 1:
                raise ValidationError("kappa_tilde must be >= 1")
            tail = tail_sum(spectrum, min(kt, spectrum.d))
            if tail <= 0:
                raise ValidationError("empty spectrum tail")
            gamma = 1.0 / (2.0 * cfg.psi * tail)
            hp = derive_overparam(cfg.delta, gamma, kt, cfg.psi, spectrum)
            cuts = compute_cutoffs(spectrum, hp, cfg.N, sgd_delta=_sgd_delta(cfg))
            bc = bound_constants(spectrum, hp)
            total = asgd_bound(inst, hp, s, cfg.N, variant=cfg.variant).total
            row.update({"status": "ok", "gamma": hp.gamma, "beta": hp.beta,
                        "c": hp.c, "q": hp.q, "k_ddagger": cuts.k_ddagger,
                        "k_hat": cuts.k_hat, "k_dagger": cuts.k_dagger,
                        "k_star": cuts.k_star, "l": bc.l, "r": bc.r,
                        "bound_total": total})
        except ValidationError as exc:
            row.update({"status": f"infeasible: {exc}"})
            print(f"warning: kappa_tilde={kt} skipped ({exc})", file=sys.stderr)
        rows.append(row)
        print(" ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
    if args.out:
        path = os.path.join(args.out, "sweep_kappa.csv")
        _write_table_csv(path, cfg, columns, rows)
        print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    results = run_checks(args.level)
    ok = print_report(results)
    return 0 if ok else 1


# ------------------------------------------------------------------- parsing

_OVERRIDES = [
    ("--spectrum-kind", "spectrum_kind", str),
    ("--spectrum-param", "spectrum_param", float),
    ("--spectrum-custom", "spectrum_custom", str),
    ("--d", "d", int),
    ("--regime", "regime", str),
    ("--delta", "delta", float),
    ("--gamma", "gamma", float),
    ("--alpha", "alpha", float),
    ("--kappa-tilde", "kappa_tilde", int),
    ("--psi", "psi", float),
    ("--shb-c", "shb_c", float),
    ("--sgd-delta", "sgd_delta", float),
    ("--w0", "w0", str),
    ("--w-star", "w_star", str),
    ("--noise-variance", "noise_variance", float),
    ("--s-list", "s_list", str),
    ("--N", "N", int),
    ("--reps", "reps", int),
    ("--seed", "seed", int),
    ("--engines", "engines", str),
    ("--algorithms", "algorithms", str),
    ("--data-model", "data_model", str),
    ("--variant", "variant", str),
    ("--threads", "threads", int),
]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out", help="output directory")
    for flag, _, typ in _OVERRIDES:
        if typ in (int, float):
            parser.add_argument(flag, type=typ, default=None)
        else:
            parser.add_argument(flag, default=None)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    for flag, field_name, typ in _OVERRIDES:
        val = getattr(args, field_name, None)
        if val is None:
            continue
        if field_name == "s_list":
            updates[field_name] = tuple(int(x) for x in str(val).split(","))
        elif field_name in ("engines", "algorithms"):
            updates[field_name] = tuple(x.strip() for x in str(val).split(","))
        else:
            updates[field_name] = val
    if getattr(args, "variant", None) is not None and args.variant not in ("main", "appendix"):
        raise ValidationError("--variant must be 'main' or 'appendix'")
    return replace(cfg, **updates)


def _resolve_config(args, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    return _apply_overrides(cfg, args)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asgdlab",
                                description="accelerated SGD risk bounds, exact "
                                            "second-moment oracle, Monte Carlo")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("cutoffs", help="hyperparameters, cutoffs, decay table")
    _add_common(sp)
    sp.add_argument("--max-rows", type=int, default=25)

    for name, help_ in (("bound", "closed-form bound reports"),
                        ("oracle", "exact second-moment risks"),
                        ("simulate", "Monte Carlo risks")):
        sp = sub.add_parser(name, help=help_)
        _add_common(sp)

    sp = sub.add_parser("compare", help="per-direction decay comparison")
    _add_common(sp)
    sp.add_argument("--max-rows", type=int, default=25)

    sp = sub.add_parser("figure", help="run a figure preset to CSV")
    sp.add_argument("preset", choices=sorted(FIGURE_PRESETS))
    _add_common(sp)

    sp = sub.add_parser("sweep-kappa", help="kappa_tilde feasibility sweep")
    _add_common(sp)
    sp.add_argument("--kappas", required=True, help="comma list of kappa_tilde values")

    sp = sub.add_parser("verify", help="run the property suites")
    sp.add_argument("--level", choices=("fast", "full"), default="fast")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "figure":
            return cmd_figure(None, args)
        cfg = _resolve_config(args)
        if args.command == "cutoffs":
            return cmd_cutoffs(cfg, args)
        if args.command == "bound":
            return cmd_bound(cfg, args)
        if args.command == "oracle":
            return cmd_oracle(cfg, args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        if args.command == "compare":
            return cmd_compare(cfg, args)
        if args.command == "sweep-kappa":
            return cmd_sweep_kappa(cfg, args)
        raise ValidationError(f"unknown command {args.command!r}")
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
