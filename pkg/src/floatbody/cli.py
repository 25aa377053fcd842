"""Command line front end: ``floatbody {run,sweep,verify-mesh,dump-envelope}``.

Every run writes its artifacts into the output directory::

    envelope.csv      phi, a, b, atilde, a', b', b''
    solution.csv      chi, Y1, Y2, Y1p, Y2p, detA, r1, r2
    contour.csv       phi, x, y, branch
    contour.svg       section (solid) and water envelope (dashed)
    mesh.obj          surface of revolution
    report.json       residuals, simplicity, mesh and oracle verdicts

A failing stage writes ``diagnostics.json`` instead (plus whatever was
produced before it) and the process exits with the code of the failure
class: 2 config, 3 profile, 4 geometry, 5 solver stall, 6 numeric,
7 invalid shape, 8 verification.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import oracle
from . import shape as S
from . import solver
from .config import PRESETS, load
from .envelope import build_envelope, write_table
from .errors import (ConfigError, FloatBodyError, InvalidShapeError, SolverStall,
                     VerificationFailed)
from .plotting import plot_section

log = logging.getLogger("floatbody")

SWEEP_PARAMS = {"c": "profile.c", "N": "solver.n_intervals", "n_theta": "mesh.n_theta"}


def _dump_json(data, path):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_diagnostics(out_dir, stage, exc, extra=None):
    diag = {
        "stage": stage,
        "error": type(exc).__name__,
        "exit_code": getattr(exc, "exit_code", 1),
        "message": str(exc),
    }
    if isinstance(exc, SolverStall):
        diag["chi"] = exc.chi
        diag["det"] = exc.det
    diag.update(extra or {})
    _dump_json(diag, os.path.join(out_dir, "diagnostics.json"))
    return diag


class Pipeline:
    """Envelope, solve, residual gate, shape, mesh and oracle for one config.

    Each stage stores its product on the instance, so a failed run still
    exposes what was computed before the failure.
    """

    def __init__(self, cfg, out_dir=None):
        self.cfg = cfg
        self.out_dir = out_dir or cfg.out_dir
        self.stage = "setup"
        self.report = {"name": cfg.name, "config": cfg.raw}
        self.envelope = self.ctx = self.solution = self.contour = self.mesh = None

    def _path(self, name):
        return os.path.join(self.out_dir, name)

    def _emit(self, kind):
        return self.cfg.emit.get(kind, True)

    def run(self):
        cfg = self.cfg
        os.makedirs(self.out_dir, exist_ok=True)
        for msg in cfg.advisory:
            log.warning(msg)

        self.stage = "envelope"
        self.envelope = env = build_envelope(cfg.profile)
        self.ctx = ctx = cfg.kernel_context(env)
        if self._emit("csv"):
            write_table(env, self._path("envelope.csv"))
        self.report["envelope"] = {"delta": env.delta, "alpha1": env.alpha1,
                                   "condition_i_satisfied": env.condition_i_satisfied}

        self.stage = "solve"
        t0 = time.perf_counter()
        try:
            self.solution = sol = solver.solve(ctx, cfg.solver)
        except SolverStall as exc:
            if exc.partial is not None and self._emit("csv"):
                solver.write_csv(exc.partial, self._path("solution_partial.csv"))
            raise
        log.info("solved %s with N=%d in %.1fs", cfg.name, cfg.solver.n_intervals,
                 time.perf_counter() - t0)
        self.report["solver"] = dict(sol.diagnostics,
                                     condition_i_satisfied=sol.condition_i_satisfied,
                                     tube_deviation=sol.trivial_deviation())

        self.stage = "residual"
        res = np.abs(solver.residual_profile(sol, cfg.residual_phis))
        rel = res / np.array([ctx.R**3, ctx.I])
        worst = float(rel.max())
        self.report["residual"] = {
            "phis": list(cfg.residual_phis),
            "r1_over_R3": rel[:, 0].tolist(),
            "r2_over_I": rel[:, 1].tolist(),
            "max": worst,
            "gate": cfg.residual_gate,
            "passed": worst < cfg.residual_gate,
        }
        if self._emit("csv"):
            solver.write_csv(sol, self._path("solution.csv"), solver.residual_profile(sol))

        self.stage = "shape"
        self.contour = c = S.contour(sol)
        simp = S.simplicity_check(c, env)
        self.report["simplicity"] = {"delta": simp.delta, "margin": simp.margin,
                                     "worst_phi": simp.worst_phi,
                                     "self_intersecting": simp.self_intersecting,
                                     "passed": simp.passed}
        if self._emit("csv"):
            S.write_contour_csv(c, self._path("contour.csv"))
        if self._emit("svg"):
            plot_section(c, env, self._path("contour.svg"), title=cfg.name)
        if simp.self_intersecting:
            raise InvalidShapeError("contour is self-intersecting")

        self.stage = "mesh"
        self.mesh = mesh = S.revolve(c, cfg.n_theta)
        self.report["mesh"] = {"n_theta": cfg.n_theta, "vertices": len(mesh.vertices),
                               "faces": len(mesh.faces), "volume": mesh.volume(),
                               "shell_volume": S.shell_volume(c) * S.polygon_factor(cfg.n_theta),
                               "watertight": mesh.is_watertight(),
                               "euler_characteristic": mesh.euler_characteristic()}
        if self._emit("obj"):
            mesh.write_obj(self._path("mesh.obj"))

        self.stage = "oracle"
        angles = oracle.default_angles(cfg.n_angles)
        floor = oracle.noise_floor(cfg.n_theta, cfg.solver.n_intervals, angles, cfg.solver.grid)
        rep = oracle.verify(mesh, env, ctx.I, angles, gate=cfg.gate_factor * floor,
                            centroid_tol=cfg.centroid_tol * ctx.R, vol_tol=cfg.vol_tol)
        self.report["oracle"] = json.loads(rep.to_json())
        self.report["oracle"]["noise_floor"] = floor

        failures = []
        if not self.report["residual"]["passed"]:
            failures.append(f"residual {worst:.3e} exceeds {cfg.residual_gate:.1e} I")
        if not simp.passed:
            failures.append(f"simplicity margin {simp.margin:.3e} is not positive")
        failures += rep.failures
        self.report["failures"] = failures
        self.report["passed"] = not failures
        if self._emit("json"):
            _dump_json(self.report, self._path("report.json"))
        if failures:
            self.stage = "verdict"
            raise VerificationFailed("; ".join(failures))
        return self.report


def run(cfg, out_dir=None):
    """Execute the pipeline; returns ``(exit_code, pipeline)``."""
    pipe = Pipeline(cfg, out_dir)
    try:
        pipe.run()
    except FloatBodyError as exc:
        log.error("%s failed during %s: %s", cfg.name, pipe.stage, exc)
        os.makedirs(pipe.out_dir, exist_ok=True)
        extra = {"partial_report": pipe.report} if pipe.stage == "verdict" else {}
        _write_diagnostics(pipe.out_dir, pipe.stage, exc, extra)
        return exc.exit_code, pipe
    return 0, pipe


def sweep(cfg, parameter, values, out_dir=None):
    """Run the pipeline for each value of ``parameter``; failures are recorded.

    Writes ``sweep_<parameter>.csv`` and returns its rows.
    """
    if parameter not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}")
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for v in values:
        v = float(v) if parameter == "c" else int(v)
        sub = cfg.with_overrides(**{SWEEP_PARAMS[parameter]: v})
        t0 = time.perf_counter()
        code, pipe = run(sub, os.path.join(out_dir, f"{parameter}_{v}"))
        r = pipe.report
        orc = r.get("oracle", {})
        rows.append({
            "value": v,
            "exit_code": code,
            "max_residual": r.get("residual", {}).get("max", math.nan),
            "I_deviation": orc.get("max_I_dev", math.nan),
            "noise_floor": orc.get("noise_floor", math.nan),
            "simplicity_margin": r.get("simplicity", {}).get("margin", math.nan),
            "tube_deviation": r.get("solver", {}).get("tube_deviation", math.nan),
            "runtime": time.perf_counter() - t0,
        })
    path = os.path.join(out_dir, f"sweep_{parameter}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return rows


def verify_mesh(cfg, mesh_path, out_dir=None, target_I=None):
    """Oracle-only check of an external OBJ against the configured envelope."""
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    mesh = S.read_obj(mesh_path)
    if not mesh.is_watertight():
        raise InvalidShapeError(f"{mesh_path} is not a closed, consistently oriented mesh")
    env = build_envelope(cfg.profile)
    target = math.pi * cfg.R**4 / 4.0 if target_I is None else target_I
    angles = oracle.default_angles(cfg.n_angles)
    floor = oracle.noise_floor(cfg.n_theta, cfg.solver.n_intervals, angles, cfg.solver.grid)
    rep = oracle.verify(mesh, env, target, angles, gate=cfg.gate_factor * floor,
                        centroid_tol=cfg.centroid_tol * cfg.R, vol_tol=cfg.vol_tol)
    data = json.loads(rep.to_json())
    data["noise_floor"] = floor
    data["mesh"] = os.path.basename(mesh_path)
    _dump_json(data, os.path.join(out_dir, "verification.json"))
    return rep


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--preset", choices=sorted(PRESETS), help="built-in configuration")
    common.add_argument("--out-dir", help="output directory (overrides output.dir)")
    common.add_argument("--seedless", action="store_true",
                        help="accepted for scripting symmetry; nothing here is random")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="floatbody", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="full pipeline")
    sw = sub.add_parser("sweep", parents=[common], help="pipeline over a parameter")
    sw.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    sw.add_argument("--values", required=True, nargs="+")
    vm = sub.add_parser("verify-mesh", parents=[common], help="oracle on an OBJ mesh")
    vm.add_argument("mesh")
    vm.add_argument("--target-I", type=float, help="default: pi R^4 / 4")
    de = sub.add_parser("dump-envelope", parents=[common], help="write envelope.csv")
    de.add_argument("--points", type=int, default=513)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = args.out_dir
    try:
        cfg = load(args.config, args.preset)
        out_dir = out_dir or cfg.out_dir
        if args.command == "run":
            code, pipe = run(cfg, out_dir)
            print(f"{cfg.name}: {'passed' if code == 0 else f'failed ({pipe.stage})'}")
            return code
        if args.command == "sweep":
            rows = sweep(cfg, args.param, args.values, out_dir)
            for r in rows:
                print(",".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                               for k, v in r.items()))
            return 0
        if args.command == "verify-mesh":
            rep = verify_mesh(cfg, args.mesh, out_dir, args.target_I)
            print(f"max |I_z/I - 1| = {rep.max_I_dev:.3e}: {'passed' if rep.passed else 'failed'}")
            if not rep.passed:
                raise VerificationFailed("; ".join(rep.failures))
            return 0
        os.makedirs(out_dir, exist_ok=True)
        env = build_envelope(cfg.profile)
        write_table(env, os.path.join(out_dir, "envelope.csv"), args.points)
        return 0
    except FloatBodyError as exc:
        log.error("%s", exc)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            _write_diagnostics(out_dir, args.command, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
