"""Run configuration: YAML schema, defaults and built-in presets.

A configuration file is a YAML mapping with the sections below; every key
is optional and falls back to the default shown.

.. code-block:: yaml

    name: run              # stem used in log messages and the report
    R: 1.0                 # radius of the underlying sphere
    profile:
      family: zero         # zero | cosine_odd | piecewise_quartic | tabulated
      c: 0.0               # amplitude (|c| <= 1 advised)
      n: 1                 # harmonic index, cosine_odd only
      knots: []            # [[theta, rho], ...], tabulated only
    solver:
      n_intervals: 1024
      grid: angle          # angle | uniform
      chi_start: null      # null: alpha1 if the envelope starts flat, else fallback_start
      fallback_start: 1.0e-3
      det_tol: 1.0e-6
      jump_tol: 0.05
    kernel:
      gamma_order: 64
    residual:
      phis: [0.25, 0.5, 0.75, 1.0]
      gate: 1.0e-4         # max |r| / I
    mesh:
      n_theta: 256
    oracle:
      angles: 16           # cut angles, evenly spaced on [0, pi/2]
      vol_tol: 1.0e-6
      gate_factor: 3.0     # multiple of the sphere noise floor at the same resolution
      centroid_tol: 1.0e-2 # in units of R
    output:
      dir: out
      emit: {csv: true, svg: true, obj: true, json: true}
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import yaml

from .envelope import CurvatureProfile
from .errors import ConfigError, ProfileError
from .kernel import KernelContext
from .solver import GRIDS, SolverConfig

DEFAULTS = {
    "name": "run",
    "R": 1.0,
    "profile": {"family": "zero", "c": 0.0, "n": 1, "knots": []},
    "solver": {
        "n_intervals": 1024,
        "grid": "angle",
        "chi_start": None,
        "fallback_start": 1e-3,
        "det_tol": 1e-6,
        "jump_tol": 0.05,
    },
    "kernel": {"gamma_order": 64},
    "residual": {"phis": [0.25, 0.5, 0.75, 1.0], "gate": 1e-4},
    "mesh": {"n_theta": 256},
    "oracle": {"angles": 16, "vol_tol": 1e-6, "gate_factor": 3.0, "centroid_tol": 1e-2},
    "output": {"dir": "out", "emit": {"csv": True, "svg": True, "obj": True, "json": True}},
}

PRESETS = {
    "sphere": {"name": "sphere", "profile": {"family": "zero"}},
    "fig3a": {"name": "fig3a", "profile": {"family": "piecewise_quartic", "c": 0.5}},
    "fig3b": {"name": "fig3b", "profile": {"family": "cosine_odd", "n": 1, "c": 0.5}},
    "fig3c": {"name": "fig3c", "profile": {"family": "cosine_odd", "n": 2, "c": 0.5}},
    "fig3d": {"name": "fig3d", "profile": {"family": "cosine_odd", "n": 3, "c": 0.4}},
}


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path}{key} must be a mapping")
            out[key] = _merge(base[key], val, f"{path}{key}.")
        else:
            out[key] = val
    return out


@dataclass
class RunConfig:
    """Validated run parameters; build with :meth:`from_dict` or :func:`load`."""

    name: str = "run"
    R: float = 1.0
    profile: CurvatureProfile = field(default_factory=CurvatureProfile.zero)
    solver: SolverConfig = field(default_factory=SolverConfig)
    gamma_order: int = 64
    residual_phis: tuple = (0.25, 0.5, 0.75, 1.0)
    residual_gate: float = 1e-4
    n_theta: int = 256
    n_angles: int = 16
    vol_tol: float = 1e-6
    gate_factor: float = 3.0
    centroid_tol: float = 1e-2
    out_dir: str = "out"
    emit: dict = field(default_factory=lambda: dict(DEFAULTS["output"]["emit"]))
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data=None):
        d = _merge(DEFAULTS, data or {})
        try:
            return cls._build(d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def _build(cls, d):
        prof = d["profile"]
        try:
            if prof["family"] == "tabulated":
                profile = CurvatureProfile.tabulated(prof["knots"])
            else:
                profile = CurvatureProfile(prof["family"], c=float(prof["c"]), n=int(prof["n"]))
        except ProfileError as exc:
            raise ConfigError(f"profile: {exc}") from exc
        s = d["solver"]
        if s["grid"] not in GRIDS:
            raise ConfigError(f"solver.grid must be one of {GRIDS}")
        solver = SolverConfig(
            n_intervals=int(s["n_intervals"]),
            grid=s["grid"],
            chi_start=None if s["chi_start"] is None else float(s["chi_start"]),
            fallback_start=float(s["fallback_start"]),
            det_tol=float(s["det_tol"]),
            jump_tol=float(s["jump_tol"]),
        )
        cfg = cls(
            name=str(d["name"]),
            R=float(d["R"]),
            profile=profile,
            solver=solver,
            gamma_order=int(d["kernel"]["gamma_order"]),
            residual_phis=tuple(float(p) for p in d["residual"]["phis"]),
            residual_gate=float(d["residual"]["gate"]),
            n_theta=int(d["mesh"]["n_theta"]),
            n_angles=int(d["oracle"]["angles"]),
            vol_tol=float(d["oracle"]["vol_tol"]),
            gate_factor=float(d["oracle"]["gate_factor"]),
            centroid_tol=float(d["oracle"]["centroid_tol"]),
            out_dir=str(d["output"]["dir"]),
            emit={k: bool(v) for k, v in d["output"]["emit"].items()},
            raw=d,
        )
        cfg.validate()
        return cfg

    def validate(self):
        positive = {
            "R": self.R, "solver.fallback_start": self.solver.fallback_start,
            "solver.det_tol": self.solver.det_tol, "solver.jump_tol": self.solver.jump_tol,
            "kernel.gamma_order": self.gamma_order, "residual.gate": self.residual_gate,
            "mesh.n_theta": self.n_theta, "oracle.angles": self.n_angles,
            "oracle.vol_tol": self.vol_tol, "oracle.gate_factor": self.gate_factor,
            "oracle.centroid_tol": self.centroid_tol,
        }
        for key, val in positive.items():
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigError(f"{key} must be positive, got {val!r}")
        if self.n_theta < 8:
            raise ConfigError("mesh.n_theta must be at least 8")
        if self.n_angles < 2:
            raise ConfigError("oracle.angles must be at least 2")
        if any(not 0.0 < p <= 1.0 for p in self.residual_phis):
            raise ConfigError("residual.phis must lie in (0, 1]")
        unknown = set(self.emit) - {"csv", "svg", "obj", "json"}
        if unknown:
            raise ConfigError(f"unknown output.emit flags {sorted(unknown)}")

    @property
    def advisory(self):
        """Warnings that do not block a run (amplitudes beyond the small-c regime)."""
        if self.profile.family in ("cosine_odd", "piecewise_quartic") and abs(self.profile.c) > 1.0:
            return [f"|c| = {abs(self.profile.c)} > 1: far outside the perturbative regime"]
        return []

    def kernel_context(self, envelope):
        return KernelContext(envelope, R=self.R, gamma_order=self.gamma_order)

    def with_overrides(self, **changes):
        """Copy with dotted-path overrides, e.g. ``{"profile.c": 0.25}``."""
        d = copy.deepcopy(self.raw or DEFAULTS)
        for key, val in changes.items():
            node = d
            *parents, leaf = key.split(".")
            for p in parents:
                node = node[p]
            if leaf not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[leaf] = val
        return RunConfig.from_dict(d)


def load(path=None, preset=None):
    """Preset values overlaid by the file at ``path`` (either may be omitted)."""
    data = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data = copy.deepcopy(PRESETS[preset])
    if path is not None:
        try:
            with open(path) as fh:
                text = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
        if text is None:
            text = {}
        if not isinstance(text, dict):
            raise ConfigError("config file must hold a mapping")
        data = _merge(DEFAULTS, data)
        data = _merge(data, text)
    return RunConfig.from_dict(data)
