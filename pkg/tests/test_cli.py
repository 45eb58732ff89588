"""End-to-end tests of the command-line harness."""

import json

import numpy as np

from sgpbench.cli import main


def _read_long(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


class TestToyCommand:
    def test_writes_loadable_csv(self, tmp_path):
        out = tmp_path / "step.csv"
        code = main(
            ["toy", "--toy", "step1d", "--toy-n", "50", "--seed", "3",
             "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x0,y"
        assert len(lines) == 51


class TestBenchCommand:
    def test_small_bench_run(self, tmp_path):
        out = tmp_path / "results"
        code = main(
            [
                "bench", "--toy", "smooth1d", "--toy-n", "80",
                "--kernel", "se", "--seed", "0",
                "--m-schedule", "5,10", "--out", str(out),
            ]
        )
        assert code == 0
        rows = _read_long(out / "report_long.csv")
        sgpr_rows = [r for r in rows if r["method"] == "SGPR-baseline"]
        assert [r["m"] for r in sgpr_rows] == ["5", "10"]
        assert {r["method"] for r in rows} == {
            "SGPR-baseline", "Linear", "ConstantMean",
        }
        for row in sgpr_rows:
            assert float(row["bound_value"]) <= float(row["upper_bound"]) + 1e-8
        manifest = json.loads((out / "report_manifest.json").read_text())
        assert manifest["schema_version"] == 1
        assert manifest["method"] == "SGPR-baseline"

    def test_multi_seed_expansion(self, tmp_path):
        out = tmp_path / "results"
        code = main(
            [
                "bench", "--toy", "smooth1d", "--toy-n", "60",
                "--m-schedule", "5", "--seeds", "2", "--out", str(out),
            ]
        )
        assert code == 0
        rows = _read_long(out / "report_long.csv")
        seeds = {r["seed"] for r in rows if r["method"] == "SGPR-baseline"}
        assert seeds == {"0", "1"}

    def test_json_format(self, tmp_path):
        out = tmp_path / "results"
        code = main(
            [
                "bench", "--toy", "smooth1d", "--toy-n", "60",
                "--m-schedule", "5", "--format", "json", "--out", str(out),
            ]
        )
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert doc["schema_version"] == 1
        assert doc["records"]

    def test_data_file_input(self, tmp_path):
        data = tmp_path / "data.csv"
        rng = np.random.default_rng(0)
        x = rng.uniform(-2, 2, size=(60, 1))
        y = np.sin(x[:, 0]) + 0.1 * rng.standard_normal(60)
        data.write_text(
            "x,y\n" + "\n".join(f"{a},{b}" for a, b in zip(x[:, 0], y))
        )
        out = tmp_path / "results"
        code = main(
            ["bench", "--data", str(data), "--m-schedule", "5",
             "--out", str(out)]
        )
        assert code == 0


class TestGprCommand:
    def test_gpr_run(self, tmp_path):
        out = tmp_path / "results"
        code = main(
            ["gpr", "--toy", "smooth1d", "--toy-n", "60", "--out", str(out)]
        )
        assert code == 0
        rows = _read_long(out / "gpr_long.csv")
        assert rows[0]["method"] == "GPR"
        assert rows[0]["bound_kind"] == "lml"

    def test_cap_skips_large_runs(self, tmp_path):
        out = tmp_path / "results"
        code = main(
            [
                "gpr", "--toy", "smooth1d", "--toy-n", "100",
                "--exact-gpr-cap", "10", "--out", str(out),
            ]
        )
        assert code == 1


class TestSvgpCommand:
    def test_small_svgp_run(self, tmp_path):
        out = tmp_path / "results"
        code = main(
            [
                "svgp", "--toy", "smooth1d", "--toy-n", "60",
                "--m", "5", "--steps", "40", "--lr", "0.05",
                "--out", str(out),
            ]
        )
        assert code == 0
        rows = _read_long(out / "svgp_long.csv")
        assert rows[0]["method"] == "SVGP"
        assert np.isfinite(float(rows[0]["bound_value"]))


class TestReportCommand:
    def test_merge_and_smooth(self, tmp_path):
        out1 = tmp_path / "r1"
        main(
            [
                "bench", "--toy", "smooth1d", "--toy-n", "80",
                "--m-schedule", "5,10", "--out", str(out1),
            ]
        )
        merged = tmp_path / "merged"
        code = main(
            [
                "report", str(out1 / "report_long.csv"),
                "--smooth", "--out", str(merged),
            ]
        )
        assert code == 0
        rows = _read_long(merged / "merged_long.csv")
        assert rows
        pivot = (merged / "merged_pivot.csv").read_text().splitlines()
        assert pivot[0].startswith("metric,method,")

    def test_rejects_non_report_file(self, tmp_path):
        bogus = tmp_path / "x.csv"
        bogus.write_text("a,b\n1,2\n")
        code = main(["report", str(bogus), "--out", str(tmp_path / "o")])
        assert code == 1
