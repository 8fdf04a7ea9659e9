"""Flat, typed experiment configuration with a stable text round trip.

The on-disk format is one ``key = value`` pair per line, ``#`` comments,
blank lines ignored.  Every field has a declared type; lists are
comma-separated.  Serialization writes every field in schema order with
floats at 17 significant digits, so parse -> serialize -> parse is the
identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ValidationError
from .hyper import (HyperParams, derive_classical, derive_from_alpha,
                    derive_overparam, derive_shb)
from .spectrum import ProblemInstance, Spectrum, make_spectrum

__all__ = ["ExperimentConfig", "parse_config", "serialize_config",
           "load_config", "resolve_w0", "build_spectrum", "build_hyper",
           "build_instance"]

_F = "%.17g"


@dataclass(frozen=True)
class ExperimentConfig:
    spectrum_kind: str = "polynomial"
    spectrum_param: float = 2.0
    spectrum_custom: str = ""
    d: int = 2000
    regime: str = "overparam"
    delta: float = 0.1
    gamma: float = 0.0            # 0 means "derive from alpha"
    alpha: float = 0.9875
    kappa_tilde: int = 5
    psi: float = 3.0
    shb_c: float = 0.9
    sgd_delta: float = 0.0        # 0 means "use delta"
    w0: str = "zeros"
    w_star: str = "zeros"
    noise_variance: float = 0.01
    s_list: tuple = (50, 100, 150, 200, 250, 300, 350, 400, 450, 500)
    N: int = 500
    reps: int = 10
    seed: int = 20240801
    engines: tuple = ("oracle", "montecarlo")
    algorithms: tuple = ("asgd", "sgd")
    data_model: str = "gaussian"
    variant: str = "appendix"
    threads: int = 1
    out: str = "results"


_INT_TUPLES = {"s_list"}
_STR_TUPLES = {"engines", "algorithms"}


def _format_value(name: str, value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(x) for x in value)
    if isinstance(value, float):
        return _F % value
    return str(value)


def _parse_value(name: str, text: str, pytype):
    text = text.strip()
    if name in _INT_TUPLES:
        return tuple(int(x) for x in text.split(",") if x.strip())
    if name in _STR_TUPLES:
        return tuple(x.strip() for x in text.split(",") if x.strip())
    if pytype is int:
        return int(text)
    if pytype is float:
        return float(text)
    return text


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = [f"{f.name} = {_format_value(f.name, getattr(cfg, f.name))}"
             for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    schema = {f.name: f.type for f in fields(cfg)}
    types = {f.name: type(getattr(cfg, f.name)) for f in fields(cfg)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in schema:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        updates[key] = _parse_value(key, val, types[key])
    return replace(cfg, **updates)


def load_config(path: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


_W0_RE = re.compile(r"^(?:(?P<coef>[-+]?[0-9.eE+-]+)\*)?e_(?P<idx>[0-9]+)$")


def resolve_w0(spec: str, d: int) -> np.ndarray:
    """Vector presets: "zeros", "<coef>*e_<i>" (1-based), or a comma list."""
    spec = spec.strip()
    if spec == "zeros":
        return np.zeros(d)
    m = _W0_RE.match(spec)
    if m:
        idx = int(m.group("idx"))
        if not 1 <= idx <= d:
            raise ValidationError(f"basis index {idx} outside 1..{d}")
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        v = np.zeros(d)
        v[idx - 1] = coef
        return v
    try:
        vals = np.array([float(x) for x in spec.split(",")])
    except ValueError as exc:
        raise ValidationError(f"cannot parse vector spec {spec!r}") from exc
    if vals.size != d:
        raise ValidationError(f"vector spec has {vals.size} entries, expected {d}")
    return vals


def build_spectrum(cfg: ExperimentConfig) -> Spectrum:
    if cfg.spectrum_kind == "custom":
        if not cfg.spectrum_custom:
            raise ValidationError(
                "spectrum_kind=custom requires spectrum_custom "
                "(comma-separated values or @file with one value per line)")
        text = cfg.spectrum_custom
        if text.startswith("@"):
            with open(text[1:], "r", encoding="utf-8") as fh:
                vals = [float(x) for x in fh.read().split()]
        else:
            vals = [float(x) for x in text.split(",")]
        return make_spectrum("custom", len(vals), values=vals)
    if cfg.spectrum_kind == "polynomial":
        return make_spectrum("polynomial", cfg.d, exponent=cfg.spectrum_param)
    if cfg.spectrum_kind == "exponential":
        return make_spectrum("exponential", cfg.d, rate=cfg.spectrum_param)
    raise ValidationError(f"unknown spectrum_kind {cfg.spectrum_kind!r}")


def build_hyper(cfg: ExperimentConfig, spectrum: Spectrum) -> HyperParams:
    if cfg.regime == "overparam":
        if cfg.gamma > 0:
            return derive_overparam(cfg.delta, cfg.gamma, cfg.kappa_tilde, cfg.psi, spectrum)
        return derive_from_alpha(cfg.delta, cfg.alpha, cfg.kappa_tilde, cfg.psi, spectrum)
    if cfg.regime == "classical":
        return derive_classical(spectrum, cfg.psi)
    if cfg.regime == "shb":
        return derive_shb(cfg.shb_c, cfg.gamma, spectrum, cfg.psi, cfg.N)
    raise ValidationError(f"unknown regime {cfg.regime!r}")


def build_instance(cfg: ExperimentConfig, spectrum: Spectrum) -> ProblemInstance:
    d = spectrum.d
    return ProblemInstance(spectrum, resolve_w0(cfg.w_star, d), resolve_w0(cfg.w0, d),
                           cfg.noise_variance, cfg.psi)
