"""CLI tests: exit codes, config echo, overrides, file round trips."""

import json

import numpy as np
import pytest

from qdmd import read_matrix, write_matrix
from qdmd.cli import main


def sweep_config(tmp_path, **overrides):
    cfg = {
        "source": {"kind": "system", "system": "pendulum", "x0": [1.0, 0.0],
                   "dt": 0.1, "duration": 8.0, "substeps": 10, "embedding": 10},
        "T": 60,
        "bit_list": [3, 5],
        "trials": 3,
        "master_seed": 21,
        "rank_rule": {"kind": "fixed", "r": 2},
        "quantizer_range": [-1.0, 1.0],
        "margin": None,
        "norm": "spectral",
        "mode": "full_and_reduced",
        "recovery_enabled": False,
        "prediction_horizon": 30,
    }
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


class TestSimulate:
    def test_writes_trajectory_and_echoes_config(self, tmp_path, capsys):
        out = tmp_path / "traj.bin"
        code = main(["simulate", "--system", "pendulum", "--duration", "2.0",
                     "--seed", "9", "--out", str(out)])
        assert code == 0
        captured = capsys.readouterr().out
        assert "resolved config:" in captured
        assert '"seed": 9' in captured
        assert read_matrix(out).shape == (2, 21)

    def test_divergence_exit_code(self, tmp_path, capsys):
        mat = tmp_path / "a.csv"
        write_matrix(mat, np.array([[50.0]]), fmt="csv")
        code = main(["simulate", "--matrix", str(mat), "--x0", "1.0",
                     "--dt", "1.0", "--duration", "60.0", "--substeps", "1",
                     "--out", str(tmp_path / "t.bin")])
        assert code == 3

    def test_bad_x0_exit_code(self, tmp_path):
        code = main(["simulate", "--x0", "a,b", "--out", str(tmp_path / "t.bin")])
        assert code == 2


class TestQuantize:
    def test_round_trip_with_normalize(self, tmp_path, capsys):
        src = tmp_path / "m.csv"
        write_matrix(src, np.array([[0.0, 5.0], [2.0, 3.0]]), fmt="csv")
        out = tmp_path / "q.bin"
        code = main(["quantize", "--in", str(src), "--bits", "6",
                     "--normalize", "--seed", "4", "--out", str(out)])
        assert code == 0
        captured = capsys.readouterr().out
        assert '"epsilon": 0.03125' in captured
        assert "saturated entries: 0" in captured
        q = read_matrix(out)
        assert q.shape == (2, 2)
        assert np.all(np.abs(q) <= 1.0)

    def test_bad_bits_exit_code(self, tmp_path):
        src = tmp_path / "m.csv"
        write_matrix(src, np.eye(2), fmt="csv")
        code = main(["quantize", "--in", str(src), "--bits", "0",
                     "--out", str(tmp_path / "q.bin")])
        assert code == 2

    def test_missing_input_exit_code(self, tmp_path):
        code = main(["quantize", "--in", str(tmp_path / "absent.bin"),
                     "--bits", "4", "--out", str(tmp_path / "q.bin")])
        assert code == 2


class TestEstimate:
    def make_pair(self, tmp_path):
        rng = np.random.Generator(np.random.PCG64(2))
        a = np.array([[0.9, 0.1], [0.0, 0.8]])
        x = rng.normal(size=(2, 30))
        phi = tmp_path / "phi.bin"
        phip = tmp_path / "phip.bin"
        write_matrix(phi, x)
        write_matrix(phip, a @ x)
        return phi, phip, a

    def test_full_method_recovers_operator(self, tmp_path, capsys):
        phi, phip, a = self.make_pair(tmp_path)
        out = tmp_path / "K.bin"
        code = main(["estimate", "--phi", str(phi), "--phiprime", str(phip),
                     "--method", "full", "--out", str(out)])
        assert code == 0
        assert np.allclose(read_matrix(out), a, atol=1e-10)
        assert "leading eigenvalues" in capsys.readouterr().out

    def test_reduced_method_writes_eigs(self, tmp_path):
        phi, phip, _ = self.make_pair(tmp_path)
        out = tmp_path / "Kr.bin"
        eigs = tmp_path / "eigs.csv"
        code = main(["estimate", "--phi", str(phi), "--phiprime", str(phip),
                     "--method", "reduced", "--rank", "2", "--out", str(out),
                     "--eigs-out", str(eigs)])
        assert code == 0
        assert read_matrix(out).shape == (2, 2)
        ev = read_matrix(eigs)
        assert sorted(ev[0].tolist(), reverse=True) == pytest.approx([0.9, 0.8])

    def test_ridge_requires_gamma(self, tmp_path):
        phi, phip, _ = self.make_pair(tmp_path)
        code = main(["estimate", "--phi", str(phi), "--phiprime", str(phip),
                     "--method", "ridge", "--out", str(tmp_path / "K.bin")])
        assert code == 2

    def test_conflicting_rank_rules_rejected(self, tmp_path):
        phi, phip, _ = self.make_pair(tmp_path)
        code = main(["estimate", "--phi", str(phi), "--phiprime", str(phip),
                     "--method", "reduced", "--rank", "2", "--energy", "0.9",
                     "--out", str(tmp_path / "K.bin")])
        assert code == 2


class TestSweep:
    def test_runs_and_reports(self, tmp_path, capsys):
        cfg = sweep_config(tmp_path)
        out = tmp_path / "report.json"
        code = main(["sweep", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        captured = capsys.readouterr().out
        assert "resolved config:" in captured
        assert '"epsilon"' in captured
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["kind"] == "sweep"
        assert set(report["results"]) == {"3", "5"}

    def test_byte_identical_across_threads(self, tmp_path):
        cfg = sweep_config(tmp_path)
        out1 = tmp_path / "r1.json"
        out2 = tmp_path / "r2.json"
        assert main(["sweep", "--config", str(cfg), "--out", str(out1),
                     "--threads", "1"]) == 0
        assert main(["sweep", "--config", str(cfg), "--out", str(out2),
                     "--threads", "4"]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_flag_overrides(self, tmp_path, capsys):
        cfg = sweep_config(tmp_path)
        out = tmp_path / "r.json"
        code = main(["sweep", "--config", str(cfg), "--out", str(out),
                     "--seed", "99", "--trials", "2", "--bits", "4"])
        assert code == 0
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["config"]["master_seed"] == 99
        assert report["config"]["trials"] == 2
        assert list(report["results"]) == ["4"]

    def test_unknown_key_rejected(self, tmp_path):
        cfg = sweep_config(tmp_path, typo_field=1)
        code = main(["sweep", "--config", str(cfg),
                     "--out", str(tmp_path / "r.json")])
        assert code == 2

    def test_missing_config_rejected(self, tmp_path):
        code = main(["sweep", "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "r.json")])
        assert code == 2

    def test_dataset_source_from_file(self, tmp_path):
        rng = np.random.Generator(np.random.PCG64(8))
        data = tmp_path / "data.bin"
        write_matrix(data, rng.normal(size=(3, 90)))
        cfg = sweep_config(
            tmp_path,
            source={"kind": "dataset", "path": "data.bin", "embedding": 2},
            T=60, rank_rule={"kind": "fixed", "r": 3}, mode="reduced_only")
        out = tmp_path / "r.json"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["config"]["source"]["path"] == "data.bin"
        assert report["results"]["3"]["full_matrix_rel_err"] is None


class TestRecover:
    def test_guard_ok_exit_zero(self, tmp_path, capsys):
        rng = np.random.Generator(np.random.PCG64(0))
        x = rng.uniform(-1, 1, size=(2, 500))
        a = np.array([[0.9, 0.1], [0.0, 0.8]])
        phi, phip = tmp_path / "phi.bin", tmp_path / "phip.bin"
        write_matrix(phi, x)
        write_matrix(phip, a @ x)
        out = tmp_path / "K.bin"
        code = main(["recover", "--phi", str(phi), "--phiprime", str(phip),
                     "--epsilon", "0.125", "--out", str(out)])
        assert code == 0
        assert "guard: ok" in capsys.readouterr().out
        assert read_matrix(out).shape == (2, 2)

    def test_guard_infeasible_exit_five(self, tmp_path, capsys):
        rng = np.random.Generator(np.random.PCG64(1))
        row = rng.uniform(-1, 1, size=300)
        x = np.vstack([row, row + 1e-7 * rng.normal(size=300)])
        phi, phip = tmp_path / "phi.bin", tmp_path / "phip.bin"
        write_matrix(phi, x)
        write_matrix(phip, np.roll(x, -1, axis=1))
        code = main(["recover", "--phi", str(phi), "--phiprime", str(phip),
                     "--epsilon", "0.5", "--out", str(tmp_path / "K.bin")])
        assert code == 5
        assert "infeasible" in capsys.readouterr().out


class TestReport:
    def test_summarizes_sweep(self, tmp_path, capsys):
        cfg = sweep_config(tmp_path)
        out = tmp_path / "r.json"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["report", "--in", str(out)]) == 0
        captured = capsys.readouterr().out
        assert "avg_pred_rel_err" in captured
        assert "trials: 6 completed" in captured

    def test_rejects_non_report(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text('{"schema_version": 1}', encoding="utf-8")
        assert main(["report", "--in", str(path)]) == 2
