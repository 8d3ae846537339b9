"""Command-line surface: single evaluations, bounds, optimization, simulation
and CSV sweeps.

Exit codes: 0 success, 1 input/stability error, 2 precision-gate failure
(the result is still printed, flagged).  Sweep rows evaluate concurrently
up to --jobs and are written in deterministic grid order; numeric inputs are
emitted with full round-trip precision, outputs with 12 significant digits.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bounds as bnd
from . import distributions as dist
from .config import ConfigError, RunConfig, load_config
from .meanaoi import mean_aoi
from .model import StabilityError, make_model
from .simulate import replicate

_GENERIC_COLUMNS = (
    "lambda,cv_G,lambda_bg,mu,mean_H,cv_H,mean_Hbg,cv_Hbg,"
    "E_A,E_D,lower,upper,lambda_star,E_plus_star,q_residual,"
    "series_length,occupancy_bg,nbue,gate,error"
)
_TABLE1_COLUMNS = (
    "s_H,lambda_bg,lambda_opt,lambda_star,E_A_opt,E_A_star,diff,error"
)


def _num(x: float) -> str:
    return f"{x:.12g}"


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


def _policy_env_overrides() -> dict:
    raw = os.environ.get("AOIQ_POLICY", "").strip()
    overrides = {}
    if raw:
        for part in raw.split(","):
            key, sep, val = part.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"bad AOIQ_POLICY entry '{part}'")
            overrides[key.strip()] = float(val)
    return overrides


def _service_mean_cv(cfg: RunConfig) -> tuple[float, float, float, float]:
    m = cfg.model
    return (
        dist.mean(m.service),
        dist.cv(m.service),
        dist.mean(m.background_service),
        dist.cv(m.background_service),
    )


def _eval_generic_row(task: dict) -> dict:
    """One sweep point: analytic AoI plus bounds and the closed-form optimum."""
    out = dict(task)
    try:
        service = dist.from_mean_cv(task["mean_H"], task["cv_H"])
        bg = dist.from_mean_cv(task["mean_Hbg"], task["cv_Hbg"])
        model = make_model(
            task["lambda"], task["cv_G"], task["lambda_bg"], task["mu"], service, bg,
            int(task.get("det_approx_order", 100)),
        )
        policy = task.get("policy")
        rep = mean_aoi(model, policy)
        eh, eh2 = dist.moments(service)
        ehbg, ehbg2 = dist.moments(bg)
        out["E_A"] = rep.mean_aoi
        out["E_D"] = rep.mean_delay
        out["lower"] = rep.lower_bound
        out["upper"] = rep.upper_bound
        out["lambda_star"] = bnd.optimal_rate(
            eh, eh2, ehbg, ehbg2, task["lambda_bg"], task["mu"], task["cv_G"]
        )
        out["E_plus_star"] = bnd.optimal_bound_value(
            eh, eh2, ehbg, ehbg2, task["lambda_bg"], task["mu"], task["cv_G"]
        )
        out["q_residual"] = rep.q_residual
        out["series_length"] = rep.series_length_used
        out["occupancy_bg"] = (
            model.rho_bg / (model.rho + model.rho_bg)
            if model.rho + model.rho_bg > 0
            else 0.0
        )
        out["nbue"] = rep.nbue_applicable
        out["gate"] = rep.gate_passed
        out["error"] = ""
    except Exception as exc:  # recorded per-row, sweep continues
        out["error"] = str(exc).replace(",", ";").replace("\n", " ")
    return out


def _eval_table1_row(task: dict) -> dict:
    """One comparison row: exact minimizer against the closed-form rate."""
    out = dict(task)
    try:
        service = dist.from_mean_cv(1.0, task["s_H"])
        bg = dist.from_mean_cv(1.0, task["s_H"])
        lam_bg, mu, s_g = task["lambda_bg"], task["mu"], task["cv_G"]
        policy = task.get("policy")

        def family(lam):
            return make_model(lam, s_g, lam_bg, mu, service, bg)

        lam_opt, ea_opt = bnd.minimize_mean_aoi(family, policy)
        eh, eh2 = dist.moments(service)
        ehbg, ehbg2 = dist.moments(bg)
        lam_star = bnd.optimal_rate(eh, eh2, ehbg, ehbg2, lam_bg, mu, s_g)
        ea_star = mean_aoi(family(lam_star), policy).mean_aoi
        out.update(
            lambda_opt=lam_opt,
            lambda_star=lam_star,
            E_A_opt=ea_opt,
            E_A_star=ea_star,
            diff=ea_star - ea_opt,
            error="",
        )
    except Exception as exc:
        out["error"] = str(exc).replace(",", ";").replace("\n", " ")
    return out


def _preset_tasks(preset: str) -> tuple[list[dict], str]:
    """Self-contained sweep grids; presets pin their own model parameters."""
    base = {"mu": 1.0, "mean_H": 1.0, "cv_H": 0.0, "mean_Hbg": 1.0, "cv_Hbg": 0.0}
    tasks = []
    if preset == "fig5":
        # mean AoI against generation-interval variability at low sampling rate
        for lam_bg in (0.8, 0.85, 0.9):
            for s_g in np.round(np.arange(0.1, 2.0001, 0.1), 10):
                tasks.append(
                    base | {"lambda": 0.05, "cv_G": float(s_g), "lambda_bg": lam_bg}
                )
        return tasks, _GENERIC_COLUMNS
    if preset == "fig7":
        # mean AoI and bounds against the generation rate
        for s_h in (0.0, 0.5, 1.0, 1.5):
            for lam_bg in (0.8, 0.85, 0.9):
                lam_max = 1.0 - lam_bg
                for frac in np.linspace(0.05, 0.95, 19):
                    tasks.append(
                        base
                        | {
                            "lambda": float(frac * lam_max),
                            "cv_G": 0.3,
                            "lambda_bg": lam_bg,
                            "cv_H": s_h,
                            "cv_Hbg": s_h,
                        }
                    )
        return tasks, _GENERIC_COLUMNS
    if preset == "fig8":
        # bounds tightness as background occupancy share grows at fixed rho_bg
        for lam_bg0 in (0.8, 0.85, 0.9):
            for scale in (1, 2, 4, 8, 16, 32, 64, 128):
                tasks.append(
                    base
                    | {
                        "lambda": 0.05,
                        "cv_G": 0.3,
                        "lambda_bg": lam_bg0 * scale,
                        "mu": float(scale),
                    }
                )
        return tasks, _GENERIC_COLUMNS
    if preset == "table1":
        for s_h in (0.0, 0.5, 1.0, 1.5):
            for lam_bg in (0.8, 0.85, 0.9):
                tasks.append(
                    {"s_H": s_h, "lambda_bg": lam_bg, "mu": 1.0, "cv_G": 0.3}
                )
        return tasks, _TABLE1_COLUMNS
    raise ConfigError(f"unknown preset '{preset}'")


def _grid_tasks(cfg: RunConfig) -> list[dict]:
    sw = cfg.sweep
    mean_h, cv_h, mean_hbg, cv_hbg = _service_mean_cv(cfg)
    lams = sw.lambda_grid or (cfg.lam,)
    sgs = sw.s_G_grid or (cfg.cv_G,)
    lbgs = sw.lambda_bg_grid or (cfg.model.lambda_bg,)
    shs = sw.s_H_grid or (None,)
    tasks = []
    for lam in lams:
        for s_g in sgs:
            if s_g < 0:
                raise ConfigError("grid sweeps need a mean/cv generation spec")
            for lam_bg in lbgs:
                for s_h in shs:
                    tasks.append(
                        {
                            "lambda": lam,
                            "cv_G": s_g,
                            "lambda_bg": lam_bg,
                            "mu": cfg.model.mu,
                            "mean_H": 1.0 if s_h is not None else mean_h,
                            "cv_H": s_h if s_h is not None else cv_h,
                            "mean_Hbg": 1.0 if s_h is not None else mean_hbg,
                            "cv_Hbg": s_h if s_h is not None else cv_hbg,
                            "det_approx_order": cfg.det_approx_order,
                        }
                    )
    return tasks


def _format_row(result: dict, columns: str) -> str:
    cells = []
    for col in columns.split(","):
        val = result.get(col, "")
        if col == "error":
            cells.append(str(val))
        elif isinstance(val, bool):
            cells.append("true" if val else "false")
        elif col in {"lambda", "cv_G", "lambda_bg", "mu", "mean_H", "cv_H",
                     "mean_Hbg", "cv_Hbg", "s_H"} and isinstance(val, float):
            cells.append(repr(val))
        elif isinstance(val, float):
            cells.append(_num(val))
        else:
            cells.append(str(val))
    return ",".join(cells)


def _write_csv(path: str | None, columns: str, rows: list[str]) -> None:
    text = f"# columns: {columns}\n{columns}\n" + "".join(r + "\n" for r in rows)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_mean_aoi(cfg: RunConfig, out: str | None) -> int:
    rep = mean_aoi(cfg.model, cfg.policy)
    print(f"E_A = {_num(rep.mean_aoi)}")
    print(f"E_D = {_num(rep.mean_delay)}")
    print(f"lower = {_num(rep.lower_bound)}")
    print(f"upper = {_num(rep.upper_bound)}")
    print(f"q_residual = {_num(rep.q_residual)}")
    print(f"series_length = {rep.series_length_used}")
    print(f"nbue = {'true' if rep.nbue_applicable else 'false'}")
    print(f"gate = {'passed' if rep.gate_passed else 'FAILED'}")
    if out:
        task = _model_task(cfg)
        _write_csv(out, _GENERIC_COLUMNS, [_format_row(_eval_generic_row(task), _GENERIC_COLUMNS)])
    return 0 if rep.gate_passed else 2


def _model_task(cfg: RunConfig) -> dict:
    mean_h, cv_h, mean_hbg, cv_hbg = _service_mean_cv(cfg)
    if cfg.cv_G < 0:
        raise ConfigError("CSV output needs a mean/cv generation spec")
    return {
        "lambda": cfg.lam,
        "cv_G": cfg.cv_G,
        "lambda_bg": cfg.model.lambda_bg,
        "mu": cfg.model.mu,
        "mean_H": mean_h,
        "cv_H": cv_h,
        "mean_Hbg": mean_hbg,
        "cv_Hbg": cv_hbg,
        "det_approx_order": cfg.det_approx_order,
        "policy": cfg.policy,
    }


def cmd_bounds(cfg: RunConfig, out: str | None) -> int:
    mset = bnd.MomentSet.from_model(cfg.model)
    lower, upper_nbue = bnd.nbue_bounds(mset)
    var_h = mset.EH2 - mset.EH**2
    var_g = mset.EG2 - mset.EG**2
    _, upper_daley = bnd.general_bounds_daley(mset, var_h, var_g)
    nbue = cfg.model.gen_dist is not None and dist.is_nbue(cfg.model.gen_dist)
    s_g = dist.cv(cfg.model.gen_dist) if cfg.model.gen_dist is not None else None
    print(f"lower = {_num(lower)}")
    print(f"upper_nbue = {_num(upper_nbue)}" if nbue else "upper_nbue = n/a")
    print(f"upper_daley = {_num(upper_daley)}")
    if s_g is not None:
        lam_star = bnd.optimal_rate(
            mset.EH, mset.EH2, mset.EHbg, mset.EHbg2, mset.lambda_bg, mset.mu, s_g
        )
        e_plus = bnd.optimal_bound_value(
            mset.EH, mset.EH2, mset.EHbg, mset.EHbg2, mset.lambda_bg, mset.mu, s_g
        )
        print(f"lambda_star = {_num(lam_star)}")
        print(f"E_plus_star = {_num(e_plus)}")
    del out
    return 0


def cmd_optimize(cfg: RunConfig, out: str | None) -> int:
    if cfg.cv_G < 0:
        return _fail("optimize needs a mean/cv generation spec")
    model = cfg.model

    def family(lam):
        return make_model(
            lam, cfg.cv_G, model.lambda_bg, model.mu, model.service,
            model.background_service, cfg.det_approx_order,
        )

    lam_opt, ea_opt = bnd.minimize_mean_aoi(family, cfg.policy)
    eh, eh2 = dist.moments(model.service)
    ehbg, ehbg2 = dist.moments(model.background_service)
    lam_star = bnd.optimal_rate(eh, eh2, ehbg, ehbg2, model.lambda_bg, model.mu, cfg.cv_G)
    ea_star = mean_aoi(family(lam_star), cfg.policy).mean_aoi
    print(f"lambda_opt = {_num(lam_opt)}")
    print(f"E_A_opt = {_num(ea_opt)}")
    print(f"lambda_star = {_num(lam_star)}")
    print(f"E_A_star = {_num(ea_star)}")
    print(f"diff = {_num(ea_star - ea_opt)}")
    del out
    return 0


def cmd_simulate(cfg: RunConfig, out: str | None, seed: int | None) -> int:
    sim = cfg.sim
    use_seed = sim.seed if seed is None else seed
    if sim.warmup is not None and sim.warmup >= sim.horizon:
        return _fail(f"warmup {sim.warmup} must be below horizon {sim.horizon}")
    est = replicate(
        cfg.model, sim.horizon, sim.reps, use_seed,
        warmup=sim.warmup, batches=sim.batches,
    )
    rep = mean_aoi(cfg.model, cfg.policy)
    z_aoi = (est.mean_aoi - rep.mean_aoi) / est.stderr_aoi
    z_delay = (est.mean_delay - rep.mean_delay) / est.stderr_delay
    print(f"sim_E_A = {_num(est.mean_aoi)} +- {_num(est.stderr_aoi)}")
    print(f"sim_E_D = {_num(est.mean_delay)} +- {_num(est.stderr_delay)}")
    print(f"sim_E_peak = {_num(est.mean_peak)}")
    print(f"analytic_E_A = {_num(rep.mean_aoi)}")
    print(f"analytic_E_D = {_num(rep.mean_delay)}")
    print(f"z_E_A = {_num(z_aoi)}")
    print(f"z_E_D = {_num(z_delay)}")
    print(f"n_tagged = {est.n_tagged}")
    print(f"seed = {est.seed}")
    del out
    return 0 if rep.gate_passed else 2


def cmd_sweep(cfg: RunConfig, target: str, out: str | None, jobs: int) -> int:
    if target == "grid":
        tasks, columns = _grid_tasks(cfg), _GENERIC_COLUMNS
    else:
        tasks, columns = _preset_tasks(target)
    if not tasks:
        return _fail("sweep grid is empty")
    for task in tasks:
        task["policy"] = cfg.policy
    worker = _eval_table1_row if target == "table1" else _eval_generic_row
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, tasks))
    else:
        results = [worker(t) for t in tasks]
    rows = [_format_row(r, columns) for r in results]
    _write_csv(out, columns, rows)
    if any(r["error"] for r in results):
        return 1
    if any(r.get("gate") is False for r in results):
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="aoiq",
        description="Mean Age-of-Information analysis with background traffic",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "mean-aoi": "analytic mean AoI with bounds and diagnostics",
        "bounds": "closed-form bounds and the near-optimal rate",
        "optimize": "golden-section minimization of the mean AoI over lambda",
        "simulate": "replicated simulation against the analytic value",
        "sweep": "CSV sweep over a preset or explicit grid",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        if name == "sweep":
            p.add_argument("target", help="fig5 | fig7 | fig8 | table1 | grid")
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None, help="CSV output path")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
        p.add_argument("--seed", type=int, default=None, help="override sim seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, _policy_env_overrides())
        if args.command == "mean-aoi":
            return cmd_mean_aoi(cfg, args.out)
        if args.command == "bounds":
            return cmd_bounds(cfg, args.out)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.seed)
        return cmd_sweep(cfg, args.target, args.out, max(1, args.jobs))
    except (ConfigError, StabilityError, ValueError, RuntimeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
