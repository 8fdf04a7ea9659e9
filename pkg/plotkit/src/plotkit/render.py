"""Figure rendering from experiment CSVs.

Three figure families:

* risk panels -- excess risk vs burn-in s, log-y; solid lines for the exact
  oracle engine, markers with +/-2 stderr bars for Monte Carlo means;
* decomposition panels -- bias and variance curves per algorithm, log-y;
* decay step plot -- per-eigendirection decay bases for the two algorithms
  with the crossover index marked.

Rendering is pure: fixed style, fixed geometry, no timestamps, salted SVG
ids, so the same CSV bytes produce identical image bytes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .csvdata import CsvFormatError, ResultTable, read_table  # noqa: E402

__all__ = ["FigureSpec", "render", "load_spec"]

_STYLE = {
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "plotkit",
}

_COLORS = {"asgd": "#c0392b", "sgd": "#2c5aa0", "shb": "#2e7d32"}
_SAVE_KW = {"bbox_inches": "tight", "metadata": {"Date": None}}


@dataclass(frozen=True)
class FigureSpec:
    """What to render: input CSVs, panel kind/layout, output destination."""

    kind: str                      # "risk" | "decomposition" | "decay"
    inputs: tuple                  # CSV paths, one per panel
    output: str                    # path without extension
    formats: tuple = ("png", "svg")
    titles: tuple = ()             # optional, one per panel
    logy: bool = True


def load_spec(path: str) -> FigureSpec:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return FigureSpec(kind=raw["kind"], inputs=tuple(raw["inputs"]),
                      output=raw["output"],
                      formats=tuple(raw.get("formats", ("png", "svg"))),
                      titles=tuple(raw.get("titles", ())),
                      logy=bool(raw.get("logy", True)))


def _series(table: ResultTable, engine: str, algorithm: str, value_col: str):
    rows = table.select(engine=engine, algorithm=algorithm)
    if engine == "montecarlo":
        rows = [r for r in rows if r.get("rep") == "mean"]
    rows.sort(key=lambda r: r["s"])
    xs = [r["s"] for r in rows]
    ys = [r[value_col] for r in rows]
    errs = [2.0 * r["stderr"] for r in rows]
    return xs, ys, errs


def _algorithms(table: ResultTable) -> list:
    seen = []
    for row in table.rows:
        algo = row.get("algorithm")
        if algo and algo not in seen:
            seen.append(algo)
    return seen


def _panel_risk(ax, table: ResultTable) -> None:
    table.require_columns(("engine", "algorithm", "s", "rep", "excess_risk", "stderr"))
    drew = False
    for algo in _algorithms(table):
        color = _COLORS.get(algo, "#555555")
        xs, ys, _ = _series(table, "oracle", algo, "excess_risk")
        if xs:
            ax.plot(xs, ys, color=color, label=f"{algo} (oracle)")
            drew = True
        xs, ys, errs = _series(table, "montecarlo", algo, "excess_risk")
        if xs:
            ax.errorbar(xs, ys, yerr=errs, color=color, marker="o", ms=3.5,
                        ls="none", capsize=2, label=f"{algo} (MC, 2 s.e.)")
            drew = True
    if not drew:
        raise CsvFormatError(f"{table.path}: no risk series to draw")
    ax.set_xlabel("burn-in s")
    ax.set_ylabel("excess risk")


def _panel_decomposition(ax, table: ResultTable) -> None:
    table.require_columns(("engine", "algorithm", "s", "rep", "bias", "variance",
                           "stderr"))
    drew = False
    for algo in _algorithms(table):
        color = _COLORS.get(algo, "#555555")
        for part, style in (("bias", "-"), ("variance", "--")):
            xs, ys, _ = _series(table, "oracle", algo, part)
            if xs:
                ax.plot(xs, ys, color=color, ls=style, label=f"{algo} {part} (oracle)")
                drew = True
            xs, ys, _ = _series(table, "montecarlo", algo, part)
            if xs:
                marker = "o" if part == "bias" else "^"
                ax.plot(xs, ys, color=color, marker=marker, ms=3.5, ls="none",
                        label=f"{algo} {part} (MC)")
                drew = True
    if not drew:
        raise CsvFormatError(f"{table.path}: no decomposition series to draw")
    ax.set_xlabel("burn-in s")
    ax.set_ylabel("error")


def _panel_decay(ax, table: ResultTable) -> None:
    table.require_columns(("index", "lambda", "asgd_base", "sgd_base"))
    rows = sorted(table.rows, key=lambda r: r["index"])
    if not rows:
        raise CsvFormatError(f"{table.path}: decay table is empty")
    idx = [r["index"] for r in rows]
    ax.step(idx, [r["asgd_base"] for r in rows], where="mid",
            color=_COLORS["asgd"], label="asgd base")
    ax.step(idx, [r["sgd_base"] for r in rows], where="mid",
            color=_COLORS["sgd"], label="sgd base")
    k_hat = table.config.get("k_hat")
    if k_hat is not None:
        ax.axvline(float(k_hat) + 0.5, color="#777777", ls=":",
                   label=f"crossover k={k_hat}")
    ax.set_xlabel("eigenvalue index")
    ax.set_ylabel("per-step decay base")


_PANELS = {"risk": _panel_risk, "decomposition": _panel_decomposition,
           "decay": _panel_decay}


def render(spec: FigureSpec) -> list:
    """Render one figure (one axes per input CSV); returns written paths."""
    if spec.kind not in _PANELS:
        raise CsvFormatError(f"unknown figure kind {spec.kind!r}")
    if not spec.inputs:
        raise CsvFormatError("figure spec lists no input CSVs")
    tables = [read_table(path) for path in spec.inputs]
    n = len(tables)
    written = []
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, n, figsize=(4.0 * n, 3.0), squeeze=False)
        try:
            for i, (ax, table) in enumerate(zip(axes[0], tables)):
                _PANELS[spec.kind](ax, table)
                if spec.logy and spec.kind != "decay":
                    ax.set_yscale("log")
                if i < len(spec.titles):
                    ax.set_title(spec.titles[i])
                ax.legend(fontsize=7)
            fig.tight_layout()
            os.makedirs(os.path.dirname(spec.output) or ".", exist_ok=True)
            for fmt in spec.formats:
                path = f"{spec.output}.{fmt}"
                fig.savefig(path, format=fmt, **_SAVE_KW)
                written.append(path)
        finally:
            plt.close(fig)
    return written
