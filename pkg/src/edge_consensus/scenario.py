"""Scenario configs (JSON in) and reports/trajectories (JSON, CSV out)."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch, EdgeConsensusError, InvalidGraph
from .graph_algebra import Graph, graph_from_dict
from .linear_systems import LtiModel
from .synthesis import DesignMode, DesignSpec, ModeBasis, ControllerGain

FORMATS = ("json", "csv")
DEFAULT_THRESHOLD = 1e-3


class ScenarioError(EdgeConsensusError, ValueError):
    """Unreadable or schema-invalid scenario document."""


@dataclass(frozen=True)
class SimulationSettings:
    horizon: float
    step: float = 1e-3
    x0: np.ndarray | None = None
    seed: int | None = None
    x0_range: tuple[float, float] = (-1.0, 1.0)
    x0_states: tuple[int, ...] | None = None
    record_every: int = 1
    threshold: float = DEFAULT_THRESHOLD

    def initial_state(self, node_count: int, n: int) -> np.ndarray:
        """Explicit ``x0`` or a seeded draw, uniform on ``x0_range`` for the
        listed (1-based) state components of every agent, zero elsewhere."""
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=float).ravel()
            if x0.size != node_count * n:
                raise DimensionMismatch(f"x0 has {x0.size} entries, expected {node_count * n}")
            return x0
        rng = np.random.default_rng(self.seed)
        states = self.x0_states or tuple(range(1, n + 1))
        x = np.zeros((node_count, n))
        lo, hi = self.x0_range
        x[:, [s - 1 for s in states]] = rng.uniform(lo, hi, size=(node_count, len(states)))
        return x.ravel()


@dataclass(frozen=True)
class Scenario:
    name: str
    graph: Graph
    model: LtiModel
    designs: tuple[DesignSpec, ...]
    output_row: np.ndarray | None = None
    simulation: SimulationSettings | None = None
    out_dir: str | None = None
    formats: tuple[str, ...] = FORMATS

    def with_overrides(self, out_dir=None, formats=None, threshold=None, seed=None) -> "Scenario":
        sc = self
        if out_dir is not None:
            sc = replace(sc, out_dir=str(out_dir))
        if formats:
            sc = replace(sc, formats=tuple(formats))
        if threshold is not None or seed is not None:
            sim = sc.simulation or SimulationSettings(horizon=10.0)
            if threshold is not None:
                sim = replace(sim, threshold=float(threshold))
            if seed is not None:
                sim = replace(sim, seed=int(seed), x0=None)
            sc = replace(sc, simulation=sim)
        return sc


def _matrix(doc, key, required=True):
    if key not in doc:
        if required:
            raise ScenarioError(f"missing '{key}'")
        return None
    try:
        m = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"'{key}' is not a numeric matrix: {exc}") from None
    return np.atleast_2d(m)


def _complex_value(v):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ScenarioError(f"complex value {v!r} must be [re, im]")
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


def _design_specs(doc) -> tuple[DesignSpec, ...]:
    try:
        mode = DesignMode(doc["mode"])
    except KeyError:
        raise ScenarioError("design needs 'mode'") from None
    except ValueError:
        raise ScenarioError(f"unknown design mode {doc['mode']!r}") from None
    if "mu" not in doc:
        raise ScenarioError("design needs 'mu'")
    mus = doc["mu"] if isinstance(doc["mu"], list) else [doc["mu"]]
    r1 = _matrix(doc, "r1")
    q1 = _matrix(doc, "q1", required=False)
    targets = doc.get("target_modes")
    if targets is not None:
        targets = tuple(_complex_value(t) for t in targets)
    specs = []
    for mu in mus:
        try:
            mu = float(mu)
        except (TypeError, ValueError):
            raise ScenarioError(f"mu value {mu!r} is not numeric") from None
        specs.append(DesignSpec(
            mode=mode, mu=mu, r1=r1, q1=q1, target_modes=targets,
            q1_scalar=doc.get("q1_scalar"),
            nu_normalization=doc.get("nu_normalization", "modal")))
    return tuple(specs)


def _simulation(doc, node_count, n) -> SimulationSettings:
    has_x0 = "x0" in doc
    has_seed = "seed" in doc
    if has_x0 == has_seed:
        raise ScenarioError("simulation needs exactly one of 'x0' or 'seed'")
    try:
        x0 = np.asarray(doc["x0"], dtype=float).ravel() if has_x0 else None
        if x0 is not None and x0.size != node_count * n:
            raise ScenarioError(f"x0 has {x0.size} entries, expected {node_count * n}")
        states = doc.get("x0_states")
        if states is not None:
            states = tuple(int(s) for s in states)
            if any(not 1 <= s <= n for s in states):
                raise ScenarioError(f"x0_states must lie in [1, {n}]")
        lo, hi = doc.get("x0_range", (-1.0, 1.0))
        return SimulationSettings(
            horizon=float(doc["horizon"]),
            step=float(doc.get("step", 1e-3)),
            x0=x0,
            seed=int(doc["seed"]) if has_seed else None,
            x0_range=(float(lo), float(hi)),
            x0_states=states,
            record_every=int(doc.get("record_every", 1)),
            threshold=float(doc.get("threshold", DEFAULT_THRESHOLD)),
        )
    except KeyError as exc:
        raise ScenarioError(f"simulation block missing {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"bad simulation block: {exc}") from None


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    for key in ("graph", "model", "design"):
        if key not in doc:
            raise ScenarioError(f"scenario missing '{key}' block")
    try:
        graph = graph_from_dict(doc["graph"])
    except InvalidGraph as exc:
        raise ScenarioError(f"invalid graph: {exc}") from None
    mdoc = doc["model"]
    try:
        model = LtiModel(_matrix(mdoc, "A"), _matrix(mdoc, "B"))
    except DimensionMismatch as exc:
        raise ScenarioError(str(exc)) from None
    c = _matrix(mdoc, "C", required=False)
    if c is not None and c.shape != (1, model.n):
        raise ScenarioError(f"C must be a 1 x {model.n} row, got {c.shape}")
    try:
        designs = _design_specs(doc["design"])
    except EdgeConsensusError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"invalid design block: {exc}") from None
    for ds in designs:
        if ds.r1.shape != (model.m, model.m):
            raise ScenarioError(f"r1 must be {model.m} x {model.m}")
    sim = None
    if "simulation" in doc:
        sim = _simulation(doc["simulation"], graph.node_count, model.n)
    outputs = doc.get("outputs", {})
    formats = tuple(outputs.get("formats", FORMATS))
    if any(f not in FORMATS for f in formats):
        raise ScenarioError(f"formats must be drawn from {FORMATS}")
    return Scenario(name=str(doc.get("name", name)), graph=graph, model=model, designs=designs,
                    output_row=c, simulation=sim, out_dir=outputs.get("dir"), formats=formats)


def bundled_scenarios() -> list[str]:
    root = resources.files("edge_consensus") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(path_or_name: str | Path) -> Scenario:
    """Load a scenario file, or a bundled scenario by name (e.g.
    ``"drying_section"``)."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text()
        name = path.stem
    else:
        res = resources.files("edge_consensus") / "scenarios" / f"{path_or_name}.json"
        if not res.is_file():
            raise ScenarioError(f"no scenario file or bundled scenario named {str(path_or_name)!r}")
        text = res.read_text()
        name = str(path_or_name)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path_or_name}: invalid JSON ({exc})") from None
    return scenario_from_dict(doc, name)


def _load_matrix(value):
    if isinstance(value, dict):
        return np.array(value["real"]) + 1j * np.array(value["imag"])
    return np.array(value, dtype=float)


def gain_from_dict(doc: dict) -> ControllerGain:
    """Rebuild a :class:`ControllerGain` from its ``to_dict`` form."""
    try:
        basis = None
        if "left_eigenvectors" in doc:
            w = np.atleast_2d(_load_matrix(doc["left_eigenvectors"]))
            lam = np.diag([complex(*p) for p in doc["target_modes"]])
            if not np.any(lam.imag):
                lam = lam.real
            r_t = np.atleast_2d(_load_matrix(doc["r_tilde"]))
            basis = ModeBasis(lambda_diag=lam, w_matrix=w, right=np.zeros_like(w),
                              h_matrix=np.zeros((0, w.shape[1])), r_tilde=r_t)
        return ControllerGain(
            k=np.atleast_2d(np.array(doc["k"], dtype=float)),
            mu=float(doc["mu"]),
            mode=DesignMode(doc["mode"]),
            p1=np.atleast_2d(np.array(doc["p1"], dtype=float)),
            q1=np.atleast_2d(np.array(doc["q1"], dtype=float)),
            r1=np.atleast_2d(np.array(doc["r1"], dtype=float)),
            order=int(doc["order"]),
            basis=basis,
            p_tilde=np.atleast_2d(_load_matrix(doc["p_tilde"])) if basis is not None else None,
            q1_scalar=doc.get("q1_scalar"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid gain document: {exc}") from None


def jsonable(obj: Any) -> Any:
    """Convert numpy containers and non-finite floats into plain JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(doc), indent=2) + "\n")


def write_trajectory_csv(path: Path, traj, node_count: int, n: int):
    """Header ``time, x_1_1 .. x_N_n[, y_1 .. y_N]``; floats at full precision."""
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["time"] + [f"x_{i}_{j}" for i in range(1, node_count + 1) for j in range(1, n + 1)]
    if traj.outputs is not None:
        header += [f"y_{i}" for i in range(1, node_count + 1)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, t in enumerate(traj.times):
            row = [t, *traj.states[k]]
            if traj.outputs is not None:
                row += list(traj.outputs[k])
            w.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(path: Path):
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    return header, data
