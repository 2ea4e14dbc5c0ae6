"""``hydrocal <subcommand> --config FILE [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from hydrocal import io
from hydrocal.config import MODES, RunConfig, parse_config, save_config
from hydrocal.errors import ConfigError, HydrocalError, WindowOutOfRange
from hydrocal.grid import build_drainage_plan, delineate_catchment, read_d8, write_d8
from hydrocal.model import LOWER, UPPER, Forcing, ParameterField, mass_balance, run

logger = logging.getLogger("hydrocal")


# ---------------------------------------------------------------------------
# shared loading
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class Setup:
    cfg: RunConfig
    plan: object
    gauge: object
    forcing: Forcing
    discharge: np.ndarray | None
    out: Path

    @property
    def area(self) -> float:
        return self.gauge.n_cells * self.plan.cell_area

    def observation(self):
        from hydrocal.calibrate.cost import Observation

        return Observation(self.discharge, self.forcing.catchment_rainfall(self.gauge), self.area,
                           self.forcing.start, self.cfg.period.warmup, segment_kwargs=self.cfg.segment_kwargs())


def _gauge(cfg, plan):
    if cfg.gauge.outlet is not None:
        return delineate_catchment(plan, tuple(cfg.gauge.outlet), cfg.gauge.id)
    area = np.where(plan.active.ravel(), plan.drained_area.ravel(), -np.inf)
    outlet = plan.cell(int(np.argmax(area)))
    logger.info("no gauge outlet configured; using the largest drained area at %s", outlet)
    return delineate_catchment(plan, outlet, cfg.gauge.id)


def _period(cfg, forcing: Forcing, q=None, q_start=None):
    start = io.parse_time(cfg.period.start) if cfg.period.start else forcing.start
    end = io.parse_time(cfg.period.end) if cfg.period.end else forcing.start + (forcing.nsteps - 1) * io.HOUR
    i0 = int((start - forcing.start) / io.HOUR)
    i1 = int((end - forcing.start) / io.HOUR) + 1
    if i0 < 0 or i1 > forcing.nsteps or i1 <= i0:
        raise WindowOutOfRange(f"period {io.format_time(start)} .. {io.format_time(end)} outside the forcing")
    forcing = forcing.window(i0, i1)
    if q is not None:
        j0 = int((start - q_start) / io.HOUR)
        if j0 < 0 or j0 + forcing.nsteps > q.size:
            raise WindowOutOfRange("discharge series does not cover the period")
        q = q[j0 : j0 + forcing.nsteps]
    if cfg.period.warmup >= forcing.nsteps:
        raise WindowOutOfRange("warm-up covers the whole period")
    return forcing, q


def load(cfg: RunConfig, out: Path, need_discharge: bool) -> Setup:
    plan = build_drainage_plan(read_d8(cfg.resolve(cfg.paths.d8)))
    gauge = _gauge(cfg, plan)
    forcing = io.load_forcing(cfg.resolve(cfg.paths.rainfall), cfg.resolve(cfg.paths.pet))
    q = q_start = None
    if need_discharge or cfg.paths.discharge is not None:
        q, q_start = io.read_discharge(cfg.resolve(cfg.paths.discharge))
    forcing, q = _period(cfg, forcing, q, q_start)
    out.mkdir(parents=True, exist_ok=True)
    return Setup(cfg, plan, gauge, forcing, q, out)


def _parameters(s: Setup) -> ParameterField:
    cfg = s.cfg
    if cfg.paths.parameters is not None:
        return io.read_parameters(cfg.resolve(cfg.paths.parameters))
    if cfg.optimizer.theta_init:
        return ParameterField.uniform(s.plan.shape, cfg.optimizer.theta_init)
    from hydrocal.calibrate.sbs import SearchSpace

    logger.info("no parameters given; using the log-midpoint of the bounds")
    return ParameterField.uniform(s.plan.shape, SearchSpace.model().midpoint())


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(s: Setup):
    theta = _parameters(s)
    res = run(s.plan, theta, None, s.forcing, [s.gauge])
    io.write_discharge(s.out / f"discharge_{s.gauge.gauge_id}.csv", res.discharge[s.gauge.gauge_id], s.forcing.start)
    io.write_json(s.out / "ledger.json", {**res.ledger, "mass_balance": mass_balance(res)})


def cmd_segment(s: Setup):
    from hydrocal.segmentation import event_mask

    obs = s.observation()
    io.write_events(s.out / "events.csv", obs.events, s.forcing.start, s.gauge.gauge_id)
    io.write_event_mask(s.out / "event_mask.csv", event_mask(s.forcing.nsteps, obs.events), s.forcing.start)
    logger.info("%d event(s) written", len(obs.events))


def cmd_signatures(s: Setup):
    from hydrocal.signatures import continuous_signatures, event_signatures, split_flow

    obs = s.observation()
    w = obs.warmup
    P = obs.rainfall[w:]
    Q = obs.discharge[w:] * obs.depth_factor
    split = split_flow(Q)
    rows = []
    g = s.gauge.gauge_id
    for sig, v in continuous_signatures(P, Q, s.cfg.cost.convention, split).items():
        rows.append((g, "continuous", None, sig, v.value, v.unit))
    for i, e in enumerate(obs.events):
        for sig, v in event_signatures(P, Q, e.shifted(-w), split, i).items():
            rows.append((g, "event", i, sig, v.value, v.unit))
    io.write_signatures(s.out / "signatures.csv", rows)
    io.write_events(s.out / "events.csv", obs.events, s.forcing.start, g)


def cmd_sensitivity(s: Setup):
    from hydrocal.sensitivity import signature_gssa

    cfg = s.cfg
    res = signature_gssa(s.plan, s.gauge, s.forcing, N=cfg.sensitivity.n, signature_ids=cfg.sensitivity.signatures,
                         seed=cfg.seed, warmup=cfg.period.warmup, reference=s.discharge,
                         segment_kwargs=cfg.segment_kwargs())
    io.write_sobol(s.out / "sobol.csv", res.rows())


def _problem(s: Setup):
    from hydrocal.calibrate.problem import CalibrationProblem

    return CalibrationProblem(s.plan, s.forcing, s.gauge, s.observation(), s.cfg.cost_config())


def cmd_calibrate(s: Setup):
    from hydrocal.calibrate.strategies import run_calibration

    o = s.cfg.optimizer
    rep = run_calibration(
        _problem(s),
        o.strategy,
        theta_init=np.array(o.theta_init) if o.theta_init else None,
        sbs_kwargs={"step0": o.sbs_step0, "min_step": o.sbs_min_step},
        vda_kwargs={"maxiter": o.vda_maxiter, "gtol": o.vda_gtol, "ftol": o.vda_ftol, "memory": o.vda_memory},
        nsga_kwargs={"names": o.nsga_objectives, "pop_size": o.nsga_pop, "generations": o.nsga_generations,
                     "seed": s.cfg.seed, "constrained": o.saw_constrained},
    )
    io.write_json(s.out / "calibration.json", rep.summary())
    io.write_iterates(s.out / "iterates.csv", rep.log)
    io.write_parameters(s.out / "parameters", rep.theta, s.plan.cellsize)
    if rep.smoo is not None:
        io.write_pareto(s.out / "pareto.csv", rep.smoo.pareto, rep.smoo.selected)


def cmd_gradient_test(s: Setup):
    from hydrocal.adjoint import gradient_test

    theta = _parameters(s)
    rep = gradient_test(s.plan, theta, None, s.forcing, s.cfg.cost_config(theta), s.observation(), s.gauge,
                        directions=s.cfg.gradient.directions, seed=s.cfg.seed)
    rep.to_csv(s.out / "gradient_test.csv")
    io.write_json(s.out / "gradient_test.json", {
        "skipped": rep.skipped,
        "passed": rep.passed,
        "max_best_relative_error": None if rep.skipped else rep.max_best_error,
    })
    if rep.skipped:
        logger.warning("gradient test skipped: %s", rep.skipped)


def cmd_synth(cfg: RunConfig, out: Path):
    from hydrocal.synth import StormSpec, synth_generate

    sy = cfg.synth
    d8 = read_d8(cfg.resolve(cfg.paths.d8))
    plan = build_drainage_plan(d8)
    gauge = _gauge(cfg, plan)
    theta = ParameterField.uniform(plan.shape, sy.theta_true)
    if sy.cp_range:
        ramp = np.linspace(sy.cp_range[0], sy.cp_range[1], plan.shape[0] * plan.shape[1]).reshape(plan.shape)
        theta["c_p"] = np.clip(ramp, LOWER[1], UPPER[1])
    spec = StormSpec(sy.nsteps, sy.n_storms, sy.duration, sy.intensity, sy.first_start, sy.spacing, sy.pet,
                     sy.jitter, sy.spatial_gradient, sy.noise, str(io.parse_time(sy.start)))
    data = synth_generate(plan, theta, spec, seed=cfg.seed, gauge=gauge)
    out.mkdir(parents=True, exist_ok=True)
    write_d8(out / "d8.asc", d8)
    io.write_stacked(out / "rainfall.csv", data.forcing.rainfall, data.forcing.start, plan.cellsize)
    io.write_stacked(out / "pet.csv", data.forcing.pet, data.forcing.start, plan.cellsize)
    io.write_discharge(out / "discharge.csv", data.discharge, data.forcing.start)
    io.write_discharge(out / "discharge_clean.csv", data.clean, data.forcing.start)
    io.write_parameters(out / "theta_true", theta, plan.cellsize)
    io.write_json(out / "synth.json", {"noise": sy.noise, "noise_nse": data.noise_nse, "seed": cfg.seed,
                                       "nsteps": sy.nsteps, "n_storms": sy.n_storms})
    # a config that points at the generated files
    follow = dataclasses.replace(
        cfg,
        paths=dataclasses.replace(cfg.paths, d8="d8.asc", rainfall="rainfall.csv", pet="pet.csv",
                                  discharge="discharge.csv", out="results"),
    )
    save_config(out / "twin.ini", follow)


COMMANDS = {
    "run": (cmd_run, False),
    "segment": (cmd_segment, True),
    "signatures": (cmd_signatures, True),
    "sensitivity": (cmd_sensitivity, False),
    "calibrate": (cmd_calibrate, True),
    "gradient-test": (cmd_gradient_test, True),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hydrocal", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=MODES)
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--seed", type=int, default=None, help="override [general] seed")
    p.add_argument("--out", default=None, help="output directory (default: [paths] out)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config, mode=args.command)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = Path(args.out) if args.out else cfg.resolve(cfg.paths.out)
        if args.command == "synth":
            cmd_synth(cfg, out)
        else:
            fn, need_q = COMMANDS[args.command]
            fn(load(cfg, out, need_q))
    except ConfigError as e:
        print(f"hydrocal: configuration error: {e}", file=sys.stderr)
        return e.exit_code
    except HydrocalError as e:
        print(f"hydrocal: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except (FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"hydrocal: numerical failure: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
