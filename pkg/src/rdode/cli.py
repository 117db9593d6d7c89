"""Command-line entry point: ``rdode {steady,spectrum,classify,simulate,verify}``.

Exit codes: 0 success, 1 acceptance failure, 2 operational error (bad
config, solver failure).  Operational errors are reported on stderr as a
single JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import io
from .acceptance import run_battery
from .dynamics import (default_dt, estimate_rate, perturb, simulate, simulate_linear)
from .errors import ConfigError, RDODEError
from .grid import Grid
from .linearize import assemble_operator, jacobian_field
from .model import DdiParams, HysteresisParams, build_model, builtin_model
from .spectra import analyze
from .steady import (SteadyState, admissible_midpoint, classify_branches, find_constant_steady,
                     find_pattern_diffusion, residual_sup, sigmoid_guess, solve_ddi_pattern,
                     solve_hysteresis_pattern, solve_newton_steady)

log = logging.getLogger("rdode")

EXIT_OK, EXIT_ACCEPTANCE, EXIT_ERROR = 0, 1, 2


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class HysteresisModelConfig(_Strict):
    type: Literal["hysteresis"]
    alpha: float
    beta: float
    p_coeffs: Annotated[list[float], Field(min_length=3, max_length=3)]
    diffusion: Annotated[float, Field(gt=0)]


class DdiModelConfig(_Strict):
    type: Literal["ddi"]
    kappa: float
    mu: float
    m1: float
    m2: float
    diffusion: Annotated[float, Field(gt=0)]


InlineModel = Annotated[Union[HysteresisModelConfig, DdiModelConfig], Field(discriminator="type")]


class SteadyConfig(_Strict):
    method: Literal["constant", "hysteresis_shoot", "ddi_shoot", "newton", "file"]
    guess: list[float] | None = None
    v_jump: Union[float, Literal["auto"]] = "auto"
    branch: Literal["u+", "u-"] = "u+"
    diffusion_ladder: list[Annotated[float, Field(gt=0)]] | None = None
    initial: str | None = None
    initial_low: list[float] | None = None
    initial_high: list[float] | None = None
    initial_width: Annotated[float, Field(gt=0, le=1)] = 0.1
    path: str | None = None
    tol: Annotated[float, Field(gt=0, le=1e-2)] = 1e-10
    max_iter: Annotated[int, Field(ge=1, le=10000)] = 100


class SpectrumConfig(_Strict):
    tol_ess: Annotated[float, Field(gt=0)] | None = None
    margin: Annotated[float, Field(gt=0)] | None = None


class SimulateConfig(_Strict):
    t_end: Annotated[float, Field(gt=0)] | None = None
    dt: Annotated[float, Field(gt=0)] | None = None
    perturbation: Literal["eigenmode", "uniform_random", "indicator_bump"] = "uniform_random"
    amplitude: Annotated[float, Field(gt=0)] = 1e-3
    seed: Annotated[int, Field(ge=0, lt=2 ** 64)] = 0
    interval: Annotated[list[float], Field(min_length=2, max_length=2)] = [0.25, 0.5]
    linear: bool = False
    fraction: Annotated[float, Field(gt=0, le=1)] = 0.5
    max_norm: Annotated[float, Field(gt=0)] | None = None
    max_records: Annotated[int, Field(ge=2)] | None = 5000
    snapshot_every: Annotated[int, Field(ge=1)] | None = None


class RunConfig(_Strict):
    model: Union[Literal["hysteresis", "bistable", "ddi"], InlineModel]
    grid_n: Annotated[int, Field(ge=8, le=4096)] = 128
    diffusion: Annotated[float, Field(gt=0)] | None = None
    steady: SteadyConfig | None = None
    spectrum: SpectrumConfig = SpectrumConfig()
    simulate: SimulateConfig = SimulateConfig()
    output_dir: str = "out"


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}"
                             for e in exc.errors())
        raise ConfigError(f"invalid config {path}: {problems}") from exc


def make_model(config):
    if isinstance(config.model, str):
        return builtin_model(config.model, config.diffusion)
    spec = config.model
    diffusion = config.diffusion if config.diffusion is not None else spec.diffusion
    if spec.type == "hysteresis":
        params = HysteresisParams(spec.alpha, spec.beta, tuple(spec.p_coeffs), diffusion)
    else:
        params = DdiParams(spec.kappa, spec.mu, spec.m1, spec.m2, diffusion)
    return build_model(params)


def compute_steady(config, model, grid):
    """Steady state per ``config.steady``; returns ``(model, steady)``.

    The model may change when a diffusion ladder is scanned.
    """
    cfg = config.steady
    if cfg is None:
        raise ConfigError("config has no 'steady' section")
    if cfg.method == "constant":
        if cfg.guess is None:
            raise ConfigError("steady.method 'constant' needs steady.guess")
        return model, find_constant_steady(model, cfg.guess, grid, max_iter=cfg.max_iter)
    if cfg.method == "hysteresis_shoot":
        if not isinstance(model.params, HysteresisParams):
            raise ConfigError("hysteresis_shoot needs a hysteresis model")
        v_jump = admissible_midpoint(model.params) if cfg.v_jump == "auto" else cfg.v_jump
        if cfg.diffusion_ladder:
            return find_pattern_diffusion(model.params, grid, v_jump, cfg.diffusion_ladder)
        return model, solve_hysteresis_pattern(model, v_jump, grid)
    if cfg.method == "ddi_shoot":
        if not isinstance(model.params, DdiParams):
            raise ConfigError("ddi_shoot needs a DDI model")
        v_jump = 0.5 * model.params.v_r if cfg.v_jump == "auto" else cfg.v_jump
        return model, solve_ddi_pattern(model, v_jump, grid, cfg.branch)
    if cfg.method == "newton":
        if cfg.initial is not None:
            initial = _load_state(cfg.initial, model, grid)
        elif cfg.initial_low is not None and cfg.initial_high is not None:
            initial = sigmoid_guess(model, grid, cfg.initial_low, cfg.initial_high, cfg.initial_width)
        else:
            raise ConfigError("newton needs steady.initial or steady.initial_low/initial_high")
        return model, solve_newton_steady(model, initial, grid, cfg.tol, cfg.max_iter)
    # method == "file"
    if cfg.path is None:
        raise ConfigError("steady.method 'file' needs steady.path")
    state = _load_state(cfg.path, model, grid)
    res = residual_sup(model, state, grid)
    labels = classify_branches(model, state)
    return model, SteadyState(state, res, labels, [], cfg.tol, 0, {"method": "file", "path": cfg.path})


def _load_state(path, model, grid):
    file_grid, state, _ = io.read_steady(path)
    if file_grid.n != grid.n:
        raise ConfigError(f"{path} has n={file_grid.n}, config grid_n={grid.n}")
    state.check_shape(model.m, model.k, grid.n)
    return state


def _model_meta(model):
    params = model.params
    out = {"name": model.name, "m": model.m, "k": model.k, "diffusion": list(model.diffusion)}
    if params is not None:
        out["params"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(params).items()}
    return out


# -- subcommands -------------------------------------------------------------------

def cmd_steady(config, out):
    model = make_model(config)
    grid = Grid(config.grid_n)
    model, steady = compute_steady(config, model, grid)
    io.write_steady(out, grid, steady, {"model": _model_meta(model)})
    summary = {"residual_sup": steady.residual_sup, "tolerance": steady.tolerance,
               "jump_points": steady.jump_points, "output": str(Path(out) / "steady.csv")}
    print(json.dumps(io.jsonable(summary)))
    if not steady.residual_sup <= steady.tolerance:
        _error("ResidualTooLarge", f"residual {steady.residual_sup:.3e} above tolerance {steady.tolerance:.3e}")
        return EXIT_ERROR
    return EXIT_OK


def _spectral(config, out, write_spectrum):
    model = make_model(config)
    grid = Grid(config.grid_n)
    model, steady = compute_steady(config, model, grid)
    op, jac, report, verdict, sufficient = analyze(model, steady, grid, config.spectrum.tol_ess,
                                                   config.spectrum.margin)
    payload = dict(verdict.to_dict(), **report.summary())
    payload["sufficient_condition"] = None if sufficient is None else sufficient.to_dict()
    payload["steady_residual"] = steady.residual_sup
    payload["model"] = _model_meta(model)
    io.write_json(Path(out) / "verdict.json", payload)
    if write_spectrum:
        io.write_spectrum(Path(out) / "spectrum.csv", report)
    return model, grid, steady, op, report, verdict, payload


def cmd_spectrum(config, out):
    *_, payload = _spectral(config, out, True)
    print(json.dumps(io.jsonable({"label": payload["label"], "s_A": payload["s_A"],
                                   "s_inf": payload["s_inf"], "s_L": payload["s_L"]})))
    return EXIT_OK


def cmd_classify(config, out):
    *_, verdict, payload = _spectral(config, out, False)
    print(verdict.label)
    return EXIT_OK


def cmd_simulate(config, out):
    model = make_model(config)
    grid = Grid(config.grid_n)
    model, steady = compute_steady(config, model, grid)
    sim = config.simulate
    jac = jacobian_field(model, steady, grid)
    op = assemble_operator(jac, grid, model.diffusion)
    report = None
    if sim.t_end is None or sim.dt is None or sim.perturbation == "eigenmode":
        _, _, report, _, _ = analyze(model, steady, grid, config.spectrum.tol_ess, config.spectrum.margin)
    t_end = sim.t_end if sim.t_end is not None else 15.0 / max(abs(report.s_L), 1e-3)
    dt = sim.dt if sim.dt is not None else default_dt(report)
    xi0 = perturb(sim.perturbation, grid, model.m, model.k, sim.amplitude, op=op, seed=sim.seed,
                  interval=tuple(sim.interval))
    if sim.linear:
        trace = simulate_linear(op, xi0, t_end, dt, sim.max_records)
    else:
        trace = simulate(model, steady, xi0, t_end, dt, sim.max_records, sim.snapshot_every)
    out = Path(out)
    io.write_trace(out / "trace.csv", trace)
    for t, snap in trace.snapshots:
        io.write_field(out / f"snapshot_t{t:.6f}.csv", grid, snap)
    try:
        fit = estimate_rate(trace, sim.fraction, sim.max_norm).to_dict()
    except RDODEError as exc:
        fit = {"rate": None, "error": type(exc).__name__, "message": str(exc)}
    fit.update(scheme=trace.scheme, t_end=t_end, dt=dt, seed=sim.seed, perturbation=sim.perturbation,
               amplitude=sim.amplitude, s_L=None if report is None else report.s_L)
    io.write_json(out / "rate.json", fit)
    print(json.dumps(io.jsonable({"rate": fit.get("rate"), "final_sup_norm": trace.sup_norms[-1]})))
    return EXIT_OK


def cmd_verify(config, out, grid_n=None, seed=0):
    if grid_n is None and config is not None:
        grid_n = config.grid_n
    report = run_battery(grid_n=grid_n, seed=seed, echo=print)
    io.write_json(Path(out) / "verify.json", report.to_dict())
    print(f"{'all criteria passed' if report.passed else 'failed: ' + str([r.number for r in report.failed])}"
          f" in {report.runtime:.1f} s")
    return EXIT_OK if report.passed else EXIT_ACCEPTANCE


def _error(kind, message, **extra):
    sys.stderr.write(json.dumps(io.jsonable(dict({"error": kind, "message": message}, **extra))) + "\n")


def build_parser():
    parser = argparse.ArgumentParser(prog="rdode", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [("steady", "compute a steady state"),
                           ("spectrum", "spectrum and verdict of a steady state"),
                           ("classify", "stability verdict only"),
                           ("simulate", "time integration of a perturbation"),
                           ("verify", "run the acceptance battery")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=(name != "verify"), help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides simulate.seed)")
        p.add_argument("--grid-n", type=int, help="grid size override")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        config = load_config(args.config) if args.config else None
        if config is not None:
            updates = {}
            if args.grid_n is not None:
                updates["grid_n"] = args.grid_n
            if args.seed is not None:
                updates["simulate"] = config.simulate.model_copy(update={"seed": args.seed})
            # re-validate so overrides obey the same ranges as the file
            config = RunConfig.model_validate(dict(config.model_dump(), **{
                k: (v.model_dump() if isinstance(v, BaseModel) else v) for k, v in updates.items()}))
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        out = args.out or (config.output_dir if config is not None else "out")
        if args.command == "verify":
            grid_n = args.grid_n
            if grid_n is not None and not 8 <= grid_n <= 4096:
                raise ConfigError("--grid-n must lie in [8, 4096]")
            return cmd_verify(config, out, grid_n, args.seed or 0)
        handler = {"steady": cmd_steady, "spectrum": cmd_spectrum, "classify": cmd_classify,
                   "simulate": cmd_simulate}[args.command]
        return handler(config, out)
    except ValidationError as exc:
        _error("ConfigError", "invalid configuration",
               details=[{"loc": list(map(str, e["loc"])), "msg": e["msg"]} for e in exc.errors()])
        return EXIT_ERROR
    except RDODEError as exc:
        _error(type(exc).__name__, str(exc))
        return EXIT_ERROR
    except (ValueError, np.linalg.LinAlgError) as exc:
        _error(type(exc).__name__, str(exc))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
