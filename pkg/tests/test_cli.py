"""CLI behaviour: dispatch, exit codes, file outputs, reproducibility."""

import json

import pytest

from cwblowup.cli import main


@pytest.fixture
def fast_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "p=3\nq=1.0\ntau=0.1\nh=0.05\nlambda=10\nblow_threshold=1e6\nmax_steps=10000\n"
    )
    return cfg


def _read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    header = lines[1].split(",")
    return header, [line.split(",") for line in lines[2:]]


class TestRunVerb:
    def test_happy_path(self, fast_config, tmp_path):
        out = tmp_path / "out"
        rc = main(["run", "--config", str(fast_config), "--output-dir", str(out)])
        assert rc == 0
        outcome = json.loads((out / "outcome.json").read_text())
        assert outcome["status"] == "BlewUp"
        assert (out / "history.csv").exists()

    def test_snapshots_written(self, fast_config, tmp_path):
        out = tmp_path / "snap"
        rc = main(
            [
                "run",
                "--config",
                str(fast_config),
                "--output-dir",
                str(out),
                "--snapshot-every",
                "50",
            ]
        )
        assert rc == 0
        snaps = sorted(out.glob("snapshot_*.csv"))
        assert snaps
        first = snaps[0].read_text().splitlines()
        assert first[1] == "x,u"

    def test_missing_config_exits_2(self, tmp_path):
        rc = main(["run", "--config", str(tmp_path / "absent.cfg")])
        assert rc == 2

    def test_inadmissible_override_exits_2(self, fast_config, tmp_path):
        rc = main(
            [
                "run",
                "--config",
                str(fast_config),
                "--set",
                "q=1.8",
                "--set",
                "p=2",
                "--output-dir",
                str(tmp_path / "x"),
            ]
        )
        assert rc == 2

    def test_unknown_key_exits_2(self, fast_config, tmp_path):
        rc = main(
            [
                "run",
                "--config",
                str(fast_config),
                "--set",
                "qq=1",
                "--output-dir",
                str(tmp_path / "x"),
            ]
        )
        assert rc == 2

    def test_byte_identical_reruns(self, fast_config, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(fast_config), "--output-dir", str(out_a)]) == 0
        assert main(["run", "--config", str(fast_config), "--output-dir", str(out_b)]) == 0
        assert (out_a / "history.csv").read_bytes() == (out_b / "history.csv").read_bytes()
        assert (out_a / "outcome.json").read_bytes() == (out_b / "outcome.json").read_bytes()

    def test_env_var_overrides_output_dir(self, fast_config, tmp_path, monkeypatch):
        env_dir = tmp_path / "from_env"
        monkeypatch.setenv("CW_OUTPUT_DIR", str(env_dir))
        rc = main(
            ["run", "--config", str(fast_config), "--output-dir", str(tmp_path / "flag")]
        )
        assert rc == 0
        assert (env_dir / "outcome.json").exists()
        assert not (tmp_path / "flag").exists()


class TestClassifyVerb:
    def test_writes_report(self, fast_config, tmp_path):
        out = tmp_path / "cls"
        rc = main(
            [
                "classify",
                "--config",
                str(fast_config),
                "--set",
                "p=2",
                "--set",
                "q=1",
                "--set",
                "h=0.5",
                "--set",
                "blow_threshold=1e12",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 0
        report = json.loads((out / "blowup_report.json").read_text())
        verdicts = {e["offset"]: e["verdict"] for e in report["offsets"]}
        assert verdicts[0] == "BlowsUp"
        assert verdicts[1] == "BlowsUp" and verdicts[-1] == "BlowsUp"
        assert verdicts[2] == "Bounded" and verdicts[-2] == "Bounded"


    def test_unfinished_run_exits_3(self, fast_config, tmp_path):
        out = tmp_path / "cls3"
        rc = main(
            [
                "classify",
                "--config",
                str(fast_config),
                "--set",
                "max_steps=5",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 3


class TestTimeTableVerb:
    def test_rows_and_lower_bound_column(self, fast_config, tmp_path):
        out = tmp_path / "tt"
        rc = main(
            [
                "time-table",
                "--config",
                str(fast_config),
                "--lambdas",
                "10,100",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 0
        header, rows = _read_rows(out / "time_table.csv")
        assert header == [
            "lambda",
            "g_lambda",
            "T_num",
            "tail",
            "T_star_star",
            "sandwich_ok",
            "status",
        ]
        assert len(rows) == 2
        for row in rows:
            lam = float(row[0])
            assert float(row[1]) == pytest.approx(1.0 / (2.0 * lam**2), rel=1e-12)
            assert float(row[2]) >= float(row[1])  # T_num at least g
            assert row[6] == "BlewUp"

    def test_requires_sine_initial(self, tmp_path):
        import numpy as np

        table = tmp_path / "bump.csv"
        x = np.linspace(-1, 1, 41)
        u = 30.0 * np.cos(0.5 * np.pi * x)
        u[0] = u[-1] = 0.0
        table.write_text("\n".join(f"{a},{b}" for a, b in zip(x, u)))
        cfg = tmp_path / "t.cfg"
        cfg.write_text("p=3\nq=1\ninitial=file:bump.csv\n")
        rc = main(
            [
                "time-table",
                "--config",
                str(cfg),
                "--lambdas",
                "10",
                "--output-dir",
                str(tmp_path / "tt"),
            ]
        )
        assert rc == 2

    def test_empty_lambda_list(self, fast_config, tmp_path):
        out = tmp_path / "tt0"
        rc = main(
            [
                "time-table",
                "--config",
                str(fast_config),
                "--lambdas",
                ",",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 0
        header, rows = _read_rows(out / "time_table.csv")
        assert rows == []


class TestFiguresVerb:
    def test_scenario_files(self, fast_config, tmp_path):
        out = tmp_path / "figs"
        rc = main(
            [
                "figures",
                "--config",
                str(fast_config),
                "--lambdas",
                "10,100",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 0
        for name in (
            "neighbor_bounded.csv",
            "neighbor_blowup.csv",
            "second_neighbor_bounded.csv",
            "time_vs_bound.csv",
        ):
            assert (out / name).exists()

        # multi-point scenario: first neighbour keeps growing (no saturation)
        header, rows = _read_rows(out / "neighbor_blowup.csv")
        col = header.index("u_m_minus_1")
        series = [float(r[col]) for r in rows]
        assert series[-1] > 100.0 * series[0]

        # damped scenario: first neighbour settles (< 1% move over last half)
        header, rows = _read_rows(out / "neighbor_bounded.csv")
        col = header.index("u_m_minus_1")
        series = [float(r[col]) for r in rows]
        half = series[len(series) // 2 :]
        assert abs(half[-1] - half[0]) < 0.01 * half[0]

        # lower-bound column of the sweep file
        header, rows = _read_rows(out / "time_vs_bound.csv")
        for row in rows:
            lam = float(row[0])
            assert float(row[1]) == pytest.approx(1.0 / (2.0 * lam**2), rel=1e-12)


class TestConvergeVerb:
    def test_study(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("p=2\nq=1\ntau=0.1\nh=0.2\nlambda=10\nblow_threshold=1e10\n")
        out = tmp_path / "conv"
        rc = main(
            [
                "converge",
                "--config",
                str(cfg),
                "--levels",
                "0.2,0.1,0.05",
                "--ref-h",
                "0.0125",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 0
        report = json.loads((out / "convergence.json").read_text())
        assert report["fitted_order"] > 1.5
        assert report["expected_order"] == 2.0
        assert (out / "convergence.csv").exists()


class TestDiagnosticsVerb:
    def test_clean_run_exits_0(self, tmp_path):
        cfg = tmp_path / "d.cfg"
        cfg.write_text("p=3\nq=1.2\ntau=0.1\nh=0.05\nlambda=10\nblow_threshold=1e9\n")
        out = tmp_path / "diag"
        rc = main(["diagnostics", "--config", str(cfg), "--output-dir", str(out)])
        assert rc == 0
        payload = json.loads((out / "diagnostics.json").read_text())
        assert payload["failures"] == []
        assert payload["ratio_diagnostics"]["applicable"]

    def test_interpolation_transfer_fails_limit_checks(self, tmp_path):
        cfg = tmp_path / "d.cfg"
        cfg.write_text("p=3\nq=1.2\ntau=0.1\nh=0.05\nlambda=10\nblow_threshold=1e9\n")
        out = tmp_path / "diag_bad"
        rc = main(
            [
                "diagnostics",
                "--config",
                str(cfg),
                "--regrid-transfer",
                "interpolate",
                "--output-dir",
                str(out),
            ]
        )
        assert rc == 4
        payload = json.loads((out / "diagnostics.json").read_text())
        assert payload["failures"]
