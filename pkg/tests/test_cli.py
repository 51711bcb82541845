import json
import subprocess
import sys

import numpy as np
import pytest

from edge_consensus.cli import main, run_command
from edge_consensus.scenario import (ScenarioError, bundled_scenarios, gain_from_dict,
                                     load_scenario, read_trajectory_csv, scenario_from_dict)
from edge_consensus.synthesis import design_first_order
from instances import drying_model, drying_x0


def _drying_doc(**design):
    doc = json.loads(load_scenario_text("drying_section"))
    doc["design"].update(design)
    return doc


def load_scenario_text(name):
    from importlib import resources
    return (resources.files("edge_consensus") / "scenarios" / f"{name}.json").read_text()


def _write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _toy_doc(**changes):
    doc = {
        "name": "toy",
        "graph": {"nodes": 2, "edges": [[1, 2]]},
        "model": {"A": [[0.0]], "B": [[1.0]]},
        "design": {"mode": "global", "mu": 1.0, "q1": [[1.0]], "r1": [[1.0]]},
        "simulation": {"x0": [1.0, -1.0], "horizon": 10.0, "step": 0.001},
    }
    for key, value in changes.items():
        doc[key] = value
    return doc


class TestScenario:

    def test_bundled(self):
        assert {"drying_section", "two_integrators"} <= set(bundled_scenarios())

    def test_drying_section_contents(self):
        sc = load_scenario("drying_section")
        np.testing.assert_array_equal(sc.model.a, drying_model().a)
        assert sc.graph.node_count == 9 and sc.graph.edge_count == 8
        assert [d.mu for d in sc.designs] == [7.0, 0.01]
        np.testing.assert_array_equal(sc.output_row, [[1.0, 0.0, 0.0]])
        np.testing.assert_allclose(sc.simulation.initial_state(9, 3), drying_x0(0))

    def test_seed_or_x0_exclusive(self):
        doc = _toy_doc()
        doc["simulation"]["seed"] = 3
        with pytest.raises(ScenarioError, match="exactly one"):
            scenario_from_dict(doc)
        del doc["simulation"]["seed"], doc["simulation"]["x0"]
        with pytest.raises(ScenarioError, match="exactly one"):
            scenario_from_dict(doc)

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("graph"),
        lambda d: d["design"].update(mode="bogus"),
        lambda d: d["design"].pop("mu"),
        lambda d: d["model"].update(B=[[1.0], [2.0]]),
        lambda d: d["graph"].update(edges=[[1, 1]]),
        lambda d: d["simulation"].update(x0=[1.0, 2.0, 3.0]),
        lambda d: d["design"].update(r1=[[1.0, 0.0], [0.0, 1.0]]),
        lambda d: d.update(outputs={"formats": ["png"]}),
    ])
    def test_invalid_documents(self, mutate):
        doc = _toy_doc()
        mutate(doc)
        with pytest.raises(ScenarioError):
            scenario_from_dict(doc)

    def test_missing_file(self):
        with pytest.raises(ScenarioError, match="no scenario"):
            load_scenario("/nonexistent/file.json")

    def test_gain_round_trip(self):
        gain = design_first_order(drying_model(), 1.0, [[100.0]], 0.01)
        back = gain_from_dict(json.loads(json.dumps(gain.to_dict())))
        np.testing.assert_array_equal(back.k, gain.k)
        assert back.q1_scalar == 1.0
        np.testing.assert_allclose(back.basis.r_tilde, gain.basis.r_tilde)


class TestSynthesize:

    def test_drying_section(self, tmp_path, capsys):
        assert main(["synthesize", "drying_section", "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "gain.json").read_text())
        assert doc["lambda_min"] == pytest.approx(4 * np.sin(np.pi / 18) ** 2)
        assert doc["global_mu_bound"] > 7
        by_mu = {r["mu"]: r for r in doc["runs"]}
        assert by_mu[7.0]["satisfies_global_bound"] is False
        for run in doc["runs"]:
            assert run["gain"]["order"] == 1
            assert run["spectrum"]["max_mismatch"] < 1e-7
        assert "mu=0.01 order=1" in capsys.readouterr().out

    def test_mu_zero(self, tmp_path, capsys):
        path = _write(tmp_path, _drying_doc(mu=0))
        assert run_command("synthesize", path, out=str(tmp_path / "o")) == 2
        assert "mu must be positive" in capsys.readouterr().err

    def test_disconnected(self, tmp_path, capsys):
        doc = _toy_doc(graph={"nodes": 4, "edges": [[1, 2], [3, 4]]})
        doc.pop("simulation")
        assert run_command("synthesize", _write(tmp_path, doc), out=str(tmp_path)) == 2
        assert "graph not connected" in capsys.readouterr().err

    def test_coupling_bound_named(self, tmp_path, capsys):
        doc = _toy_doc(design={"mode": "global", "mu": 0.4, "q1": [[1.0]], "r1": [[1.0]]})
        assert run_command("synthesize", _write(tmp_path, doc), out=str(tmp_path)) == 2
        assert "mu below 1/lambda_min(L) = 0.5" in capsys.readouterr().err

    def test_parse_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert run_command("synthesize", str(path)) == 1
        assert "invalid JSON" in capsys.readouterr().err

    def test_deterministic_reports(self, tmp_path):
        for sub in ("a", "b"):
            assert main(["simulate", "two_integrators", "--out", str(tmp_path / sub)]) == 0
            assert main(["synthesize", "drying_section", "--out", str(tmp_path / sub)]) == 0
        for name in ("gain.json", "simulation.json", "trajectory_mu_1.csv",
                     "trajectory_mu_1.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestSimulate:

    def test_two_integrators(self, tmp_path):
        assert main(["simulate", "two_integrators", "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "simulation.json").read_text())
        run = doc["runs"][0]
        assert run["time_to_consensus"] == pytest.approx(np.log(2 / 1e-3) / 2, abs=0.011)
        assert run["fitted_rate"] == pytest.approx(2.0, rel=0.02)
        header, data = read_trajectory_csv(tmp_path / "trajectory_mu_1.csv")
        assert header == ["time", "x_1_1", "x_2_1", "y_1", "y_2"]
        np.testing.assert_allclose(data[:, 1], np.exp(-2 * data[:, 0]), atol=1e-6)
        meta = json.loads((tmp_path / "trajectory_mu_1.json").read_text())
        assert meta["integrator"]["integrator"] == "rk4"

    def test_threshold_override(self, tmp_path):
        assert main(["simulate", "two_integrators", "--out", str(tmp_path),
                     "--threshold", "0.1", "--format", "json"]) == 0
        run = json.loads((tmp_path / "simulation.json").read_text())["runs"][0]
        assert run["time_to_consensus"] == pytest.approx(np.log(20) / 2, abs=0.011)
        assert not (tmp_path / "trajectory_mu_1.csv").exists()

    def test_seed_override(self, tmp_path):
        assert main(["simulate", "two_integrators", "--out", str(tmp_path), "--seed", "5",
                     "--format", "json"]) == 0
        doc = json.loads((tmp_path / "simulation.json").read_text())
        assert doc["seed"] == 5
        np.testing.assert_allclose(doc["x0"], np.random.default_rng(5).uniform(-1, 1, 2))

    def test_step_too_large(self, tmp_path, capsys):
        doc = _toy_doc()
        doc["design"]["mu"] = 1000.0
        doc["simulation"]["step"] = 0.01
        assert run_command("simulate", _write(tmp_path, doc), out=str(tmp_path)) == 3
        assert "exceeds" in capsys.readouterr().err

    def test_missing_simulation_block(self, tmp_path):
        doc = _toy_doc()
        doc.pop("simulation")
        assert run_command("simulate", _write(tmp_path, doc), out=str(tmp_path)) == 1

    def test_drying_section_both_mu(self, tmp_path):
        assert main(["simulate", "drying_section", "--out", str(tmp_path),
                     "--format", "json"]) == 0
        runs = {r["mu"]: r for r in
                json.loads((tmp_path / "simulation.json").read_text())["runs"]}
        assert runs[7.0]["consensus_measured_on"] == "output"
        for r in runs.values():
            assert r["time_to_consensus"] is not None
            assert r["final_disagreement"] < 1e-3
        assert runs[0.01]["time_to_consensus"] <= 600
        assert runs[0.01]["time_to_consensus"] >= runs[7.0]["time_to_consensus"]


class TestVerify:

    def test_drying_section_passes(self, tmp_path):
        assert main(["verify", "drying_section", "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "verification.json").read_text())
        assert doc["passed"]
        names = {c["name"] for c in doc["runs"][0]["certificates"]}
        assert {"global_riccati_residual", "spectrum_match", "cost_identity",
                "cycle_states_zero", "tree_fast_path"} <= names
        for run in doc["runs"]:
            for cert in run["certificates"]:
                assert cert["margin"] > 0

    def test_corrupted_gain_fails(self, tmp_path, capsys):
        assert main(["synthesize", "drying_section", "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "gain.json").read_text())
        for run in doc["runs"]:
            run["gain"]["k"][0][1] *= 1.1
        bad = tmp_path / "bad_gain.json"
        bad.write_text(json.dumps(doc))
        code = main(["verify", "drying_section", "--out", str(tmp_path), "--gain", str(bad)])
        assert code == 4
        assert "spectrum_match" in capsys.readouterr().err
        ver = json.loads((tmp_path / "verification.json").read_text())
        failed = {c["name"] for r in ver["runs"] for c in r["certificates"] if not c["passed"]}
        assert "spectrum_match" in failed

    def test_cyclic_graph(self, tmp_path):
        doc = _toy_doc(graph={"nodes": 4, "edges": [[1, 2], [2, 3], [3, 4], [1, 4], [1, 3]]})
        doc["simulation"] = {"seed": 1, "horizon": 5.0}
        assert run_command("verify", _write(tmp_path, doc), out=str(tmp_path)) == 0
        ver = json.loads((tmp_path / "verification.json").read_text())
        names = [c["name"] for c in ver["runs"][0]["certificates"]]
        assert "lbar_from_transform" in names and "tree_fast_path" not in names


class TestSweep:

    def test_isolated_outputs(self, tmp_path):
        code = main(["sweep", "simulate", "two_integrators", "two_integrators",
                     "--out", str(tmp_path), "--jobs", "2"])
        assert code == 0
        dirs = sorted(p.name for p in tmp_path.iterdir())
        assert dirs == ["000_two_integrators", "001_two_integrators"]
        a, b = (tmp_path / d / "simulation.json" for d in dirs)
        assert a.read_bytes() == b.read_bytes()

    def test_worst_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[]")
        assert main(["sweep", "synthesize", "two_integrators", str(bad),
                     "--out", str(tmp_path / "o")]) == 1


class TestEntryPoint:

    def test_module_invocation(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "edge_consensus.cli", "synthesize",
                               "two_integrators", "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.startswith("synthesize two_integrators:")

    @pytest.mark.parametrize("argv", [["frobnicate"], ["simulate"],
                                      ["synthesize", "two_integrators", "--format", "png"]])
    def test_usage_error(self, argv):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 1
