"""Command-line front end.

Exit codes: 0 success, 1 unreadable/invalid scenario, 2 synthesis hypothesis
failure, 3 simulation failure, 4 failed verification certificate.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import certify
from .edge_dynamics import build_transform
from .errors import (DimensionMismatch, EdgeConsensusError, InvalidGraph, SimulationError,
                     SynthesisError)
from .graph_algebra import compute_matrices, spectrum
from .linear_systems import check_assumptions
from .scenario import (FORMATS, Scenario, ScenarioError, gain_from_dict, load_scenario,
                       write_json, write_trajectory_csv)
from .simulation import (disagreement, output_disagreement, simulate_closed_loop,
                         time_to_consensus)
from .synthesis import design, global_mu_bound, predicted_spectrum

log = logging.getLogger("edge_consensus")

EXIT_OK, EXIT_PARSE, EXIT_SYNTHESIS, EXIT_SIMULATION, EXIT_VERIFY = 0, 1, 2, 3, 4


class VerificationFailed(EdgeConsensusError):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the parse-error code rather than argparse's 2,
    which is reserved for synthesis failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _configure_logging():
    level = os.environ.get("EDGE_CONSENSUS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _mu_label(mu: float) -> str:
    return f"{mu:g}"


def _out_dir(sc: Scenario) -> Path:
    return Path(sc.out_dir or Path("out") / sc.name)


def _network(sc: Scenario):
    matrices = compute_matrices(sc.graph)
    spec = spectrum(matrices)
    return matrices, spec


def _synthesize_runs(sc: Scenario, matrices, spec):
    runs = []
    bound = global_mu_bound(spec)
    for ds in sc.designs:
        gain = design(sc.model, spec, ds)
        report = predicted_spectrum(gain, spec, sc.model, matrices.laplacian)
        runs.append((ds, gain, report, {
            "mu": ds.mu,
            "satisfies_global_bound": bool(ds.mu >= bound * (1 - 1e-12)),
            "gain": gain.to_dict(),
            "spectrum": report.to_dict(),
        }))
    return runs


def _network_summary(sc: Scenario, matrices, spec) -> dict:
    return {
        "scenario": sc.name,
        "graph": sc.graph.to_dict(),
        "node_count": sc.graph.node_count,
        "edge_count": sc.graph.edge_count,
        "is_tree": sc.graph.edge_count == sc.graph.node_count - 1,
        "laplacian_eigenvalues": spec.eigenvalues,
        "lambda_min": spec.lambda_min,
        "global_mu_bound": global_mu_bound(spec),
        "assumptions": check_assumptions(sc.model).to_dict(),
        "design_mode": sc.designs[0].mode.value,
    }


def cmd_synthesize(sc: Scenario) -> dict:
    matrices, spec = _network(sc)
    doc = _network_summary(sc, matrices, spec)
    doc["runs"] = [r[3] for r in _synthesize_runs(sc, matrices, spec)]
    if "json" in sc.formats:
        write_json(_out_dir(sc) / "gain.json", doc)
    return doc


def cmd_simulate(sc: Scenario) -> dict:
    if sc.simulation is None:
        raise ScenarioError("scenario has no 'simulation' block")
    sim = sc.simulation
    matrices, spec = _network(sc)
    doc = _network_summary(sc, matrices, spec)
    x0 = sim.initial_state(sc.graph.node_count, sc.model.n)
    doc["x0"] = x0
    doc["seed"] = sim.seed
    doc["threshold"] = sim.threshold
    out = _out_dir(sc)
    runs = []
    for ds, gain, report, summary in _synthesize_runs(sc, matrices, spec):
        traj = simulate_closed_loop(matrices, sc.model, gain, x0, sim.horizon, sim.step,
                                    output=sc.output_row, record_every=sim.record_every)
        trace = disagreement(traj, matrices)
        if traj.outputs is not None:
            measure, measured_on = output_disagreement(traj, matrices), "output"
        else:
            measure, measured_on = trace.max_pairwise, "state"
        label = _mu_label(ds.mu)
        run = {
            "mu": ds.mu,
            "satisfies_global_bound": summary["satisfies_global_bound"],
            "gain_order": gain.order,
            "time_to_consensus": time_to_consensus(traj.times, measure, sim.threshold),
            "consensus_measured_on": measured_on,
            "final_disagreement": float(measure[-1]),
            "initial_disagreement": float(measure[0]),
            "fitted_rate": trace.fitted_rate,
            "fit_window": trace.fit_window,
            "predicted_speed": report.consensus_speed,
            "speed_formula": report.speed_formula,
        }
        if "csv" in sc.formats:
            name = f"trajectory_mu_{label}"
            write_trajectory_csv(out / f"{name}.csv", traj, sc.graph.node_count, sc.model.n)
            write_json(out / f"{name}.json", {
                "scenario": sc.name,
                "mu": ds.mu,
                "design": {"mode": ds.mode.value, "nu_normalization": ds.nu_normalization.value},
                "integrator": {k: traj.metadata[k] for k in ("integrator", "step", "horizon",
                                                             "record_every")},
                "seed": sim.seed,
                "gain": traj.metadata["gain"],
            })
            run["trajectory_csv"] = f"{name}.csv"
        runs.append(run)
    doc["runs"] = runs
    if "json" in sc.formats:
        write_json(out / "simulation.json", doc)
    return doc


def cmd_verify(sc: Scenario, gain_path: str | None = None) -> dict:
    matrices, spec = _network(sc)
    transform = build_transform(matrices, spec)
    sim = sc.simulation
    x0 = (sim.initial_state(sc.graph.node_count, sc.model.n) if sim is not None
          else np.random.default_rng(0).uniform(-1, 1, sc.graph.node_count * sc.model.n))
    if gain_path is not None:
        try:
            gdoc = json.loads(Path(gain_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read gain file: {exc}") from None
        gains = [gain_from_dict(r["gain"]) for r in gdoc.get("runs", [{"gain": gdoc}])]
    else:
        gains = [g for _, g, _, _ in _synthesize_runs(sc, matrices, spec)]
    doc = _network_summary(sc, matrices, spec)
    runs = []
    for gain in gains:
        certs = certify(matrices, spec, sc.model, gain, x0, transform)
        runs.append({"mu": gain.mu, "passed": all(c.passed for c in certs),
                     "certificates": [c.to_dict() for c in certs]})
    doc["runs"] = runs
    doc["passed"] = all(r["passed"] for r in runs)
    if "json" in sc.formats:
        write_json(_out_dir(sc) / "verification.json", doc)
    return doc


COMMANDS = {"synthesize": cmd_synthesize, "simulate": cmd_simulate, "verify": cmd_verify}


def _summary_line(command: str, doc: dict) -> str:
    parts = [f"{command} {doc['scenario']}:"]
    for r in doc["runs"]:
        if command == "synthesize":
            parts.append(f"mu={r['mu']:g} order={r['gain']['order']}")
        elif command == "simulate":
            tc = r["time_to_consensus"]
            parts.append(f"mu={r['mu']:g} t_consensus={'none' if tc is None else f'{tc:g}'}")
        else:
            parts.append(f"mu={r['mu']:g} {'PASS' if r['passed'] else 'FAIL'}")
    return " ".join(parts)


def run_command(command: str, scenario_path: str, out=None, formats=None, threshold=None,
                seed=None, gain_path=None) -> int:
    """Run one command and return its exit code (errors reported on stderr)."""
    try:
        sc = load_scenario(scenario_path).with_overrides(out, formats, threshold, seed)
        if command == "verify":
            doc = cmd_verify(sc, gain_path)
        else:
            doc = COMMANDS[command](sc)
        print(_summary_line(command, doc))
        if command == "verify" and not doc["passed"]:
            failed = sorted({c["name"] for r in doc["runs"] for c in r["certificates"]
                             if not c["passed"]})
            raise VerificationFailed("failed certificates: " + ", ".join(failed))
        return EXIT_OK
    except (ScenarioError, InvalidGraph, DimensionMismatch, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SynthesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    except (SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except VerificationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


def _sweep_job(args):
    command, path, out, formats, threshold, seed = args
    return run_command(command, path, out, formats, threshold, seed)


def cmd_sweep(command: str, paths, out=None, formats=None, threshold=None, seed=None,
              jobs: int | None = None) -> int:
    """Run ``command`` on several scenarios concurrently, each writing into
    its own subdirectory; returns the largest exit code."""
    root = Path(out) if out else None
    tasks = []
    for i, p in enumerate(paths):
        sub = None
        if root is not None:
            sub = str(root / f"{i:03d}_{Path(p).stem}")
        tasks.append((command, p, sub, formats, threshold, seed))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        codes = list(pool.map(_sweep_job, tasks))
    return max(codes, default=EXIT_OK)


def _common(p):
    p.add_argument("--out", help="output directory (default: out/<scenario name>)")
    p.add_argument("--format", dest="formats", action="append", choices=FORMATS,
                   help="output format; repeat for several (default: json and csv)")
    p.add_argument("--threshold", type=float, help="consensus threshold on disagreement")
    p.add_argument("--seed", type=int, help="seed for the random initial state (replaces x0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="edge-consensus",
        description="Edge-dynamics consensus controller synthesis, simulation and verification.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [("synthesize", "design the coupling gain and predict the spectrum"),
                       ("simulate", "synthesize, then simulate and measure consensus"),
                       ("verify", "run the certificate suite")]:
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", help="scenario JSON path or bundled scenario name")
        _common(p)
        if name == "verify":
            p.add_argument("--gain", help="gain report (from synthesize) to verify instead")
    p = sub.add_parser("sweep", help="run one command over many scenarios concurrently")
    p.add_argument("sweep_command", choices=sorted(COMMANDS))
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--jobs", type=int, default=None)
    _common(p)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if args.command == "sweep":
        return cmd_sweep(args.sweep_command, args.scenarios, args.out, args.formats,
                         args.threshold, args.seed, args.jobs)
    return run_command(args.command, args.scenario, args.out, args.formats, args.threshold,
                       args.seed, getattr(args, "gain", None))


if __name__ == "__main__":
    sys.exit(main())
