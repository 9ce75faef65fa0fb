"""Command-line interface: verbs, artifacts, stability, exit codes."""

import json
import os
import subprocess
import sys

import pytest

from freshcov import cli
from freshcov.cli import EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION, main


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def single_doc(out_dir, **extra):
    doc = {
        "scenario": {"kind": "single-precharged"},
        "policy": {"kind": "probability-scd", "sense_prob": 0.5, "edge_prob": 0.5},
        "replications": 2,
        "base_seed": 7,
        "output_dir": out_dir,
    }
    doc.update(extra)
    return doc


def multi_doc(out_dir, **extra):
    doc = {
        "scenario": {"kind": "multi-eh"},
        "policy": {"kind": "probability-scd", "sense_prob": 0.8, "edge_prob": 0.5},
        "replications": 2,
        "base_seed": 11,
        "output_dir": out_dir,
    }
    doc.update(extra)
    return doc


def read_rows(path):
    text = path.read_bytes().decode("utf-8")
    lines = [ln for ln in text.split("\r\n") if ln]
    header = lines[0].split(",")
    return header, [dict(zip(header, ln.split(","))) for ln in lines[1:]]


class TestAnalyze:
    def test_sweep_rows_and_artifacts(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path,
            single_doc(str(out), sweep={"axis": "eta", "values": [0.5, 0.9]}),
        )
        assert main(["analyze", "--config", cfg]) == EXIT_OK
        header, rows = read_rows(out / "analyze.csv")
        assert header[:3] == ["sweep_axis", "sweep_value", "method"]
        assert [r["sweep_value"] for r in rows] == ["0.5", "0.9"]
        assert all(r["method"] == "closed-form" for r in rows)
        assert all(0.0 <= float(r["eta_coverage"]) <= 1.0 for r in rows)
        assert (out / "manifest.json").exists()

    def test_unreachable_target_reports_zero(self, tmp_path):
        out = tmp_path / "out"
        doc = single_doc(str(out))
        doc["scenario"]["geometry"] = {"area_radius_m": 150.0}
        cfg = write_config(tmp_path, doc)
        assert main(["analyze", "--config", cfg]) == EXIT_OK
        _, rows = read_rows(out / "analyze.csv")
        assert len(rows) == 1
        assert float(rows[0]["eta_coverage"]) == 0.0
        assert float(rows[0]["violation_prob"]) == 1.0
        assert rows[0]["target_aoi_slots"] == ""

    def test_rejects_multi_kind(self, tmp_path, capsys):
        cfg = write_config(tmp_path, multi_doc(str(tmp_path / "out")))
        assert main(["analyze", "--config", cfg]) == EXIT_CONFIG
        assert "single-precharged" in capsys.readouterr().err

    def test_rejects_external_policy(self, tmp_path):
        doc = single_doc(str(tmp_path / "out"))
        doc["policy"] = {"kind": "external"}
        cfg = write_config(tmp_path, doc)
        assert main(["analyze", "--config", cfg]) == EXIT_CONFIG


class TestSimulate:
    def test_multi_kind_rows(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, multi_doc(str(out)))
        assert main(["simulate", "--config", cfg]) == EXIT_OK
        _, rows = read_rows(out / "simulate.csv")
        assert len(rows) == 1
        row = rows[0]
        assert row["method"] == "simulation"
        assert 0.0 <= float(row["eta_coverage"]) <= 1.0
        assert float(row["half_width"]) >= 0.0
        shares = [float(row[k]) for k in ("share_edge", "share_local", "share_idle")]
        assert abs(sum(shares) - 1.0) < 1e-9
        assert int(row["replications"]) == 2
        assert int(row["slots"]) == 2 * 20 * 8

    def test_empty_sweep_writes_header_only(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path,
            single_doc(str(out), sweep={"axis": "eta", "values": []}),
        )
        assert main(["simulate", "--config", cfg]) == EXIT_OK
        header, rows = read_rows(out / "simulate.csv")
        assert rows == []
        assert header[0] == "sweep_axis"


class TestOptimize:
    def test_single_matches_reference_optimum(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, single_doc(str(out)))
        assert main(["optimize", "--config", cfg]) == EXIT_OK
        _, rows = read_rows(out / "optimize.csv")
        row = rows[0]
        assert row["kind"] == "single-precharged"
        assert float(row["p_e"]) == 0.0
        assert abs(float(row["p_s"]) - 0.5021163599) < 1e-6
        assert abs(float(row["eta_coverage"]) - 0.7037565754) < 1e-6
        assert row["half_width"] == ""

    def test_multi_coarse_grid(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, multi_doc(str(out)))
        assert main(["optimize", "--config", cfg, "--grid-step", "0.5"]) == EXIT_OK
        _, rows = read_rows(out / "optimize.csv")
        row = rows[0]
        assert row["kind"] == "multi-eh"
        assert float(row["p_s"]) in (0.0, 0.5, 1.0)
        assert float(row["p_e"]) in (0.0, 0.5, 1.0)
        assert float(row["half_width"]) > 0.0


class TestSweep:
    def test_single_interleaves_methods_at_optimum(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path,
            single_doc(str(out), sweep={"axis": "eta", "values": [0.6, 0.9]}),
        )
        assert main(["sweep", "--config", cfg]) == EXIT_OK
        _, rows = read_rows(out / "sweep.csv")
        assert [r["method"] for r in rows] == [
            "closed-form",
            "simulation",
            "closed-form",
            "simulation",
        ]
        for closed, sim in zip(rows[::2], rows[1::2]):
            assert closed["sweep_value"] == sim["sweep_value"]
            # The Monte Carlo row is evaluated at the optimiser's choice.
            assert closed["p_s"] == sim["p_s"]
            assert closed["p_e"] == sim["p_e"]

    def test_multi_uses_configured_policy(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path,
            multi_doc(str(out), sweep={"axis": "n_sensors", "values": [2, 4]}),
        )
        assert main(["sweep", "--config", cfg]) == EXIT_OK
        _, rows = read_rows(out / "sweep.csv")
        assert [r["method"] for r in rows] == ["simulation", "simulation"]
        assert [r["sweep_value"] for r in rows] == ["2", "4"]
        assert all(r["p_s"] == "0.8" for r in rows)


class TestValidate:
    def test_covers_all_five_regimes_and_passes(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, single_doc(str(out)))
        assert main(["validate", "--config", cfg, "--rounds", "200000"]) == EXIT_OK
        _, rows = read_rows(out / "validate.csv")
        seen = set()
        for row in rows:
            seen |= {int(x) for x in row["regimes"].split("+")}
            assert row["pass"] == "true"
        assert seen == {1, 2, 3, 4, 5}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["passed"] is True

    def test_zero_sensing_agrees_exactly(self, tmp_path):
        out = tmp_path / "out"
        doc = single_doc(str(out))
        doc["policy"]["sense_prob"] = 0.0
        cfg = write_config(tmp_path, doc)
        assert main(["validate", "--config", cfg, "--rounds", "1000"]) == EXIT_OK
        _, rows = read_rows(out / "validate.csv")
        for row in rows:
            assert float(row["closed_form"]) == 0.0
            assert float(row["monte_carlo"]) == 0.0
            assert float(row["abs_dev"]) == 0.0

    def test_single_retry_tight_budget_agrees(self, tmp_path):
        # With one attempt allowed, budgets below the pipeline length always
        # violate, so both methods must report exactly zero there.
        out = tmp_path / "out"
        doc = single_doc(str(out))
        doc["scenario"]["channel"] = {"max_retx": 1}
        cfg = write_config(tmp_path, doc)
        assert main(["validate", "--config", cfg, "--rounds", "100000"]) == EXIT_OK
        _, rows = read_rows(out / "validate.csv")
        first = rows[0]
        assert int(first["v_th_slots"]) == 1
        assert float(first["closed_form"]) == 0.0
        assert float(first["monte_carlo"]) == 0.0

    def test_mismatch_exits_nonzero(self, tmp_path, monkeypatch):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, single_doc(str(out)))
        monkeypatch.setattr(cli, "renewal_violation_mc", lambda *a, **k: None)
        assert main(["validate", "--config", cfg, "--rounds", "1000"]) == EXIT_VALIDATION
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["passed"] is False

    def test_rejects_multi_kind(self, tmp_path):
        cfg = write_config(tmp_path, multi_doc(str(tmp_path / "out")))
        assert main(["validate", "--config", cfg]) == EXIT_CONFIG


class TestReport:
    def test_sweep_mode_renders_figure_beside_csv(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path,
            single_doc(str(out), sweep={"axis": "eta", "values": [0.6, 0.75, 0.9]}),
        )
        assert main(["report", "--config", cfg]) == EXIT_OK
        assert (out / "sweep.csv").exists()
        png = (out / "report.png").read_bytes()
        assert png[:8] == b"\x89PNG\r\n\x1a\n"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["outputs"] == ["report.png", "sweep.csv"]

    def test_trace_mode_exports_episode(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, multi_doc(str(out)))
        assert main(["report", "--config", cfg]) == EXIT_OK
        header, rows = read_rows(out / "trace.csv")
        assert header[0] == "slot"
        assert "coverage" in header
        assert any(col.startswith("aoi_sink_") for col in header)
        assert any(col.startswith("battery_") for col in header)
        assert len(rows) == 20 * 8
        assert (out / "trace.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        summary = json.loads((out / "trace_summary.json").read_text())
        assert 0.0 <= summary["eta_coverage"] <= 1.0


class TestArtifacts:
    def test_csv_and_manifest_byte_stable(self, tmp_path):
        doc = single_doc("unused", sweep={"axis": "eta", "values": [0.6, 0.9]})
        cfg = write_config(tmp_path, doc)
        blobs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
            blobs.append(
                (
                    (out / "sweep.csv").read_bytes(),
                    (out / "manifest.json").read_bytes(),
                )
            )
        assert blobs[0] == blobs[1]

    def test_crlf_line_endings(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, single_doc(str(out)))
        assert main(["simulate", "--config", cfg]) == EXIT_OK
        raw = (out / "simulate.csv").read_bytes()
        assert raw.count(b"\r\n") == raw.count(b"\n") > 0

    def test_manifest_contents(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path, single_doc(str(out), seeds=[3, 5], replications=2)
        )
        assert main(["simulate", "--config", cfg]) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest) == {"version", "verb", "config", "seeds", "outputs"}
        assert manifest["verb"] == "simulate"
        assert manifest["seeds"] == [3, 5]
        assert manifest["config"]["scenario"]["kind"] == "single-precharged"
        assert manifest["outputs"] == ["simulate.csv"]

    def test_out_flag_and_env_override(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, single_doc(str(tmp_path / "ignored")))
        flag_dir = tmp_path / "flag"
        assert main(["simulate", "--config", cfg, "--out", str(flag_dir)]) == EXIT_OK
        assert (flag_dir / "simulate.csv").exists()
        env_dir = tmp_path / "env"
        monkeypatch.setenv("FRESHCOV_OUT", str(env_dir))
        assert main(["simulate", "--config", cfg, "--out", str(flag_dir)]) == EXIT_OK
        assert (env_dir / "simulate.csv").exists()
        assert not (tmp_path / "ignored").exists()

    def test_parallel_jobs_match_sequential(self, tmp_path, monkeypatch):
        doc = single_doc("", sweep={"axis": "eta", "values": [0.6, 0.75, 0.9]})
        out_seq = tmp_path / "seq"
        doc["output_dir"] = str(out_seq)
        cfg = write_config(tmp_path, doc, name="seq.json")
        assert main(["sweep", "--config", cfg]) == EXIT_OK
        out_par = tmp_path / "par"
        doc["output_dir"] = str(out_par)
        cfg = write_config(tmp_path, doc, name="par.json")
        monkeypatch.setenv("FRESHCOV_JOBS", "3")
        assert main(["sweep", "--config", cfg]) == EXIT_OK
        assert (out_seq / "sweep.csv").read_bytes() == (out_par / "sweep.csv").read_bytes()


class TestErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
        assert "nope.json" in capsys.readouterr().err

    def test_invalid_json_reports_position(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops", encoding="utf-8")
        assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG
        assert "bad.json:1:" in capsys.readouterr().err

    def test_unknown_config_field(self, tmp_path, capsys):
        doc = single_doc(str(tmp_path / "out"))
        doc["scenario"]["channel"] = {"bogus": 1}
        cfg = write_config(tmp_path, doc)
        assert main(["simulate", "--config", cfg]) == EXIT_CONFIG
        assert "scenario.channel.bogus" in capsys.readouterr().err

    def test_bad_tcp_argument(self, capsys):
        assert main(["serve-env", "--tcp", "nonsense"]) == EXIT_CONFIG
        assert "HOST:PORT" in capsys.readouterr().err

    def test_unknown_verb_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


class TestServeEnv:
    def test_stdio_session_subprocess(self):
        cfg = {
            "kind": "single-precharged",
            "timing": {"rounds_per_episode": 2},
            "channel_fidelity": "scripted",
            "outcome_script": [True, True],
        }
        requests = [
            {"cmd": "reset", "seed": 1, "config": cfg},
            {"cmd": "step", "actions": [1]},
            {"cmd": "close"},
        ]
        payload = "\n".join(json.dumps(r) for r in requests) + "\n"
        proc = subprocess.run(
            [sys.executable, "-m", "freshcov.cli", "serve-env"],
            input=payload,
            capture_output=True,
            text=True,
            timeout=120,
            env={**os.environ, "PYTHONPATH": os.pathsep.join(sys.path)},
        )
        assert proc.returncode == 0, proc.stderr
        replies = [json.loads(line) for line in proc.stdout.splitlines()]
        assert replies[0] == {"obs": [[400.0, None, None, 0.0]]}
        assert replies[1]["reward"] == 2.0
        assert replies[2] == {"ok": True}
