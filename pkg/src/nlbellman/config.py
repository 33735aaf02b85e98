"""Scenario configuration: one JSON document drives every experiment.

A config names a command, a Bellman problem (kernel descriptors, offsets,
exterior closure, order(s), lattice), the quadrature layout, tolerances, and
output options.  Identical configs produce identical artifacts; a sha256 of
the canonical JSON is embedded in every output file for provenance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .closures import Closure, make_closure
from .errors import ConfigurationError
from .kernels import kernel_from_descriptor
from .quadrature import QuadratureScheme
from .solver import BellmanProblem

COMMANDS = ("solve", "sweep", "symbol", "diagnose", "check")

DEFAULT_CONFIG = {
    "command": "check",
    "seed": 20240817,
    "output_dir": "out",
    "plots": True,
    "problem": {
        "dimension": 1,
        "h": 1.0 / 64.0,
        "box_radius": 2.0,
        "sigma": 1.5,
        "kernels": [
            {"type": "scaled_power", "factor": 2.0},
            {"type": "log_wobble", "base": 1.5, "amplitude": 0.5, "omega": 2.0, "phase": 0.0},
        ],
        "offsets": [0.0, 0.0],
        "exterior": {
            "kind": "bumps",
            "params": {
                "bumps": [
                    {"center": [1.15], "width": 0.3, "height": 1.0},
                    {"center": [-1.3], "width": 0.4, "height": 0.4},
                ]
            },
        },
    },
    "quadrature": {
        "outer_radius": 8.0,
        "nodes_per_decade": 32,
        "angular_nodes": 16,
        "tail_factor": 32.0,
    },
    "tolerances": {"solve_tol": 1e-8, "max_iterations": 50},
    "sweep": {"sigma_list": [1.2, 1.5, 1.8, 1.95, 1.99]},
    "symbol": {"xi_min": 0.25, "xi_max": 64.0, "count": 16, "directions": 4},
    "diagnose": {"holder_center": [0.25], "holder_radii": [0.25, 0.125, 0.0625, 0.03125]},
}


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigurationError(message)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Validated scenario document plus its provenance hash."""

    command: str
    seed: int
    output_dir: str
    plots: bool
    dimension: int
    h: float
    box_radius: float
    sigma: float | None
    sigma_list: tuple
    kernel_descriptors: tuple
    offsets: tuple | None
    exterior: Closure
    scheme: QuadratureScheme
    solve_tol: float
    max_iterations: int
    sweep_options: dict = field(default_factory=dict)
    symbol_options: dict = field(default_factory=dict)
    diagnose_options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    config_hash: str = ""

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        _require(isinstance(doc, dict), "config must be a JSON object")
        command = doc.get("command")
        _require(command in COMMANDS, f"command must be one of {COMMANDS} (field: command)")

        problem = doc.get("problem")
        _require(isinstance(problem, dict), "missing problem section (field: problem)")
        dimension = int(problem.get("dimension", 1))
        _require(dimension in (1, 2), "problem.dimension must be 1 or 2")
        h = float(problem.get("h", 1.0 / 64.0))
        _require(h > 0, "problem.h must be positive")
        box = float(problem.get("box_radius", 2.0))

        sigma = problem.get("sigma")
        sweep = dict(doc.get("sweep", {}))
        sigma_list = tuple(float(s) for s in sweep.get("sigma_list", []))
        if command == "sweep":
            _require(len(sigma_list) >= 1, "sweep.sigma_list must be nonempty")
        else:
            _require(sigma is not None, "problem.sigma is required (field: problem.sigma)")
        sigma = float(sigma) if sigma is not None else None

        raw_kernels = problem.get("kernels")
        _require(isinstance(raw_kernels, list) and len(raw_kernels) >= 1,
                 "kernel family must be a nonempty list (field: problem.kernels)")
        descriptors = tuple(dict(k) for k in raw_kernels)

        offsets = problem.get("offsets")
        if offsets is not None:
            offsets = tuple(float(b) for b in offsets)
            _require(len(offsets) == len(descriptors),
                     "offsets must match kernels in length (field: problem.offsets)")

        _require("exterior" in problem, "missing exterior closure (field: problem.exterior)")
        try:
            exterior = make_closure(problem["exterior"])
        except Exception as exc:
            raise ConfigurationError(f"bad exterior closure (field: problem.exterior): {exc}")

        try:
            scheme = QuadratureScheme(**doc.get("quadrature", {}))
        except Exception as exc:
            raise ConfigurationError(f"bad quadrature section (field: quadrature): {exc}")

        tols = dict(doc.get("tolerances", {}))
        solve_tol = float(tols.get("solve_tol", 1e-8))
        _require(solve_tol > 0, "tolerances.solve_tol must be positive")
        max_iterations = int(tols.get("max_iterations", 50))
        _require(max_iterations >= 1, "tolerances.max_iterations must be at least 1")

        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha256(canonical.encode()).hexdigest()

        cfg = cls(
            command=command,
            seed=int(doc.get("seed", 0)),
            output_dir=str(doc.get("output_dir", "out")),
            plots=bool(doc.get("plots", True)),
            dimension=dimension,
            h=h,
            box_radius=box,
            sigma=sigma,
            sigma_list=sigma_list,
            kernel_descriptors=descriptors,
            offsets=offsets,
            exterior=exterior,
            scheme=scheme,
            solve_tol=solve_tol,
            max_iterations=max_iterations,
            sweep_options=sweep,
            symbol_options=dict(doc.get("symbol", {})),
            diagnose_options=dict(doc.get("diagnose", {})),
            raw=doc,
            config_hash=digest,
        )
        if cfg.sigma is not None:
            cfg.build_problem(cfg.sigma)  # fail fast on bad kernel descriptors
        return cfg

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"config is not valid JSON: {exc}")
        return cls.from_dict(doc)

    def build_kernels(self, sigma: float) -> tuple:
        out = []
        for desc in self.kernel_descriptors:
            d = dict(desc)
            d.setdefault("sigma", sigma)
            d.setdefault("dimension", self.dimension)
            try:
                out.append(kernel_from_descriptor(d))
            except Exception as exc:
                raise ConfigurationError(f"bad kernel descriptor {desc} (field: problem.kernels): {exc}")
        return tuple(out)

    def build_problem(self, sigma: float) -> BellmanProblem:
        return BellmanProblem(
            kernels=self.build_kernels(sigma),
            exterior=self.exterior,
            h=self.h,
            offsets=self.offsets,
            box_radius=self.box_radius,
        )


def default_config(command: str = "check", **overrides) -> ScenarioConfig:
    doc = json.loads(json.dumps(DEFAULT_CONFIG))
    doc["command"] = command
    doc.update(overrides)
    return ScenarioConfig.from_dict(doc)
