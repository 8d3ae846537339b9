"""Strict TOML run-configuration parsing.

A run file has four tables: [model] (required), [policy], [sim] and [sweep].
Distribution values are inline tables, either parametric
{ kind = "det" | "exp" | "erlang" | "hyperexp" | "mixederlang", ... } or the
auto-fit form { mean = x, cv = s }.  Unknown keys are rejected with the full
key path in the message.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from . import distributions as dist
from .distributions import Distribution
from .meanaoi import TruncationPolicy
from .model import ModelSpec, make_model
from .phasetype import PhaseType

__all__ = ["ConfigError", "RunConfig", "SimSettings", "SweepSettings", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Configuration file is syntactically or semantically invalid."""


@dataclass(frozen=True)
class SimSettings:
    horizon: float = 1e6
    reps: int = 8
    seed: int = 20240601
    warmup: float | None = None
    batches: int = 20


@dataclass(frozen=True)
class SweepSettings:
    preset: str | None = None
    lambda_grid: tuple[float, ...] = ()
    s_G_grid: tuple[float, ...] = ()
    s_H_grid: tuple[float, ...] = ()
    lambda_bg_grid: tuple[float, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    sim: SimSettings = field(default_factory=SimSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    # raw model numbers kept for sweep re-derivation
    lam: float = 0.0
    cv_G: float = 0.0
    det_approx_order: int = 100


def _reject_unknown(table: dict, allowed: set[str], path: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}'")


def _number(table: dict, key: str, path: str, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"missing required key '{path}.{key}'")
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"key '{path}.{key}' must be a number, got {val!r}")
    return float(val)


def parse_distribution(spec, path: str) -> Distribution:
    """Inline-table distribution: parametric by kind, or {mean, cv} auto-fit."""
    if not isinstance(spec, dict):
        raise ConfigError(f"'{path}' must be a table, got {spec!r}")
    if "kind" in spec:
        kind = spec["kind"]
        try:
            if kind == "det":
                _reject_unknown(spec, {"kind", "d"}, path)
                return dist.Deterministic(_number(spec, "d", path, required=True))
            if kind == "exp":
                _reject_unknown(spec, {"kind", "rate"}, path)
                return dist.Exponential(_number(spec, "rate", path, required=True))
            if kind == "erlang":
                _reject_unknown(spec, {"kind", "k", "rate"}, path)
                return dist.Erlang(
                    int(spec.get("k", 0)), _number(spec, "rate", path, required=True)
                )
            if kind == "hyperexp":
                _reject_unknown(spec, {"kind", "weights", "rates"}, path)
                return dist.Hyperexponential(
                    tuple(spec.get("weights", ())), tuple(spec.get("rates", ()))
                )
            if kind == "mixederlang":
                _reject_unknown(spec, {"kind", "p", "k", "rate"}, path)
                return dist.MixedErlang(
                    _number(spec, "p", path, required=True),
                    int(spec.get("k", 0)),
                    _number(spec, "rate", path, required=True),
                )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid distribution at '{path}': {exc}") from exc
        raise ConfigError(f"unknown distribution kind '{kind}' at '{path}'")
    _reject_unknown(spec, {"mean", "cv"}, path)
    mean = _number(spec, "mean", path, required=True)
    cv = _number(spec, "cv", path, required=True)
    try:
        return dist.from_mean_cv(mean, cv)
    except ValueError as exc:
        raise ConfigError(f"invalid distribution at '{path}': {exc}") from exc


def _parse_model(table: dict, path: str = "model"):
    allowed = {
        "lambda",
        "mean_G",
        "cv_G",
        "lambda_bg",
        "mu",
        "service",
        "background_service",
        "generation_ph",
        "det_approx_order",
    }
    _reject_unknown(table, allowed, path)
    if ("lambda" in table) == ("mean_G" in table) and "generation_ph" not in table:
        raise ConfigError(f"'{path}' needs exactly one of 'lambda' or 'mean_G'")
    mu = _number(table, "mu", path, default=1.0)
    lambda_bg = _number(table, "lambda_bg", path, default=0.0)
    service = parse_distribution(table.get("service"), f"{path}.service")
    bg = parse_distribution(
        table.get("background_service"), f"{path}.background_service"
    )
    order = int(table.get("det_approx_order", 100))
    if "generation_ph" in table:
        sub = table["generation_ph"]
        _reject_unknown(sub, {"gamma", "Gamma"}, f"{path}.generation_ph")
        try:
            ph = PhaseType(np.asarray(sub["gamma"]), np.asarray(sub["Gamma"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid '{path}.generation_ph': {exc}") from exc
        model = ModelSpec(
            gen_ph=ph,
            service=service,
            lambda_bg=lambda_bg,
            background_service=bg,
            mu=mu,
        )
        return model, model.lam, None, order
    lam = _number(table, "lambda", path)
    if lam is None:
        lam = 1.0 / _number(table, "mean_G", path, required=True)
    cv_g = _number(table, "cv_G", path, required=True)
    try:
        model = make_model(lam, cv_g, lambda_bg, mu, service, bg, order)
    except ValueError as exc:
        raise ConfigError(f"invalid '{path}': {exc}") from exc
    return model, lam, cv_g, order


def _parse_policy(table: dict, overrides: dict | None = None) -> TruncationPolicy:
    names = {f.name for f in fields(TruncationPolicy)}
    _reject_unknown(table, names, "policy")
    merged = dict(table)
    if overrides:
        for key, val in overrides.items():
            if key not in names:
                raise ConfigError(f"unknown policy override '{key}'")
            merged[key] = val
    kwargs = {}
    for key, val in merged.items():
        kwargs[key] = int(val) if key in {"K_init", "K_cap", "L_cap"} else float(val)
    try:
        return TruncationPolicy(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid 'policy': {exc}") from exc


def _parse_sim(table: dict) -> SimSettings:
    _reject_unknown(table, {"horizon", "reps", "seed", "warmup", "batches"}, "sim")
    try:
        return SimSettings(
            horizon=float(table.get("horizon", 1e6)),
            reps=int(table.get("reps", 8)),
            seed=int(table.get("seed", 20240601)),
            warmup=float(table["warmup"]) if "warmup" in table else None,
            batches=int(table.get("batches", 20)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'sim': {exc}") from exc


def _parse_sweep(table: dict) -> SweepSettings:
    allowed = {"preset", "lambda_grid", "s_G_grid", "s_H_grid", "lambda_bg_grid"}
    _reject_unknown(table, allowed, "sweep")
    preset = table.get("preset")
    if preset is not None and preset not in {"fig5", "fig7", "fig8", "table1"}:
        raise ConfigError(f"unknown sweep preset '{preset}'")

    def grid(key):
        vals = table.get(key, ())
        if not isinstance(vals, (list, tuple)):
            raise ConfigError(f"'sweep.{key}' must be an array")
        return tuple(float(v) for v in vals)

    return SweepSettings(
        preset=preset,
        lambda_grid=grid("lambda_grid"),
        s_G_grid=grid("s_G_grid"),
        s_H_grid=grid("s_H_grid"),
        lambda_bg_grid=grid("lambda_bg_grid"),
    )


def parse_config(text: str, policy_overrides: dict | None = None) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from exc
    _reject_unknown(raw, {"model", "policy", "sim", "sweep"}, "<root>")
    if "model" not in raw:
        raise ConfigError("missing required table [model]")
    model, lam, cv_g, order = _parse_model(raw["model"])
    return RunConfig(
        model=model,
        policy=_parse_policy(raw.get("policy", {}), policy_overrides),
        sim=_parse_sim(raw.get("sim", {})),
        sweep=_parse_sweep(raw.get("sweep", {})),
        lam=lam,
        cv_G=cv_g if cv_g is not None else -1.0,
        det_approx_order=order,
    )


def load_config(path: str, policy_overrides: dict | None = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode()
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    return parse_config(text, policy_overrides)
