import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

import topoloss as tl
from topoloss.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def run(runner, *args):
    return runner.invoke(main, [str(a) for a in args])


class TestGen:
    def test_fig2_line_defaults(self, runner, tmp_path):
        out = tmp_path / "a.vol"
        result = run(runner, "gen", "--kind", "fig2-line", "--out", out)
        assert result.exit_code == 0
        assert tl.load_volume(out).linear().tolist() == [-2.0, 1.0, -1.0, 2.0, -1.0]

    def test_constant(self, runner, tmp_path):
        out = tmp_path / "c.vol"
        result = run(runner, "gen", "--kind", "constant", "--dims", "4,4,4",
                     "--value", "3", "--out", out)
        assert result.exit_code == 0
        v = tl.load_volume(out)
        assert v.dims == (4, 4, 4) and np.all(v.values == 3.0)

    def test_unknown_kind_is_usage_error(self, runner, tmp_path):
        result = run(runner, "gen", "--kind", "nosuch", "--out", tmp_path / "x.vol")
        assert result.exit_code == 2
        assert "nosuch" in result.output

    def test_missing_dims_is_usage_error(self, runner, tmp_path):
        result = run(runner, "gen", "--kind", "constant", "--out", tmp_path / "x.vol")
        assert result.exit_code == 2

    def test_dims_too_small_is_usage_error(self, runner, tmp_path):
        result = run(runner, "gen", "--kind", "hollow-shell", "--dims", "3,3,3",
                     "--out", tmp_path / "x.vol")
        assert result.exit_code == 2


class TestPd:
    def test_fig2_diagram(self, runner, tmp_path):
        vol = tmp_path / "f.vol"
        csv = tmp_path / "f.csv"
        run(runner, "gen", "--kind", "fig2-line", "--out", vol)
        result = run(runner, "pd", vol, "--out", csv)
        assert result.exit_code == 0
        assert "dim=0 count=3" in result.output
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "dim,birth,death"
        assert lines[1:] == ["0,-2,inf", "0,-1,1", "0,-1,2"]

    def test_constant_single_essential_row(self, runner, tmp_path):
        vol = tmp_path / "c.vol"
        csv = tmp_path / "c.csv"
        run(runner, "gen", "--kind", "constant", "--dims", "3,3,3", "--out", vol)
        result = run(runner, "pd", vol, "--out", csv)
        assert result.exit_code == 0
        assert csv.read_text().strip().splitlines()[1:] == ["0,0,inf"]

    def test_missing_input(self, runner, tmp_path):
        result = run(runner, "pd", tmp_path / "nope.vol", "--out", tmp_path / "o.csv")
        assert result.exit_code == 1


class TestDist:
    @pytest.fixture
    def reference_csvs(self, tmp_path):
        d1 = tl.PersistenceDiagram(tuple(
            tl.PersistencePair(0, b, d) for b, d in [(1, 2), (3, 4), (5, 6)]))
        d2 = tl.PersistenceDiagram(tuple(
            tl.PersistencePair(0, b, d) for b, d in [(2, 3), (4, 5), (6, 7)]))
        p1, p2 = tmp_path / "d1.csv", tmp_path / "d2.csv"
        tl.write_diagram(d1, p1)
        tl.write_diagram(d2, p2)
        return p1, p2

    def test_reference_distance(self, runner, reference_csvs):
        result = run(runner, "dist", *reference_csvs)
        assert result.exit_code == 0
        assert abs(float(result.output.strip()) - 6.0) <= 0.01

    def test_identical_csvs(self, runner, reference_csvs):
        result = run(runner, "dist", reference_csvs[0], reference_csvs[0])
        assert result.exit_code == 0
        assert float(result.output.strip()) <= 1e-6

    def test_diagonal_augmented_unequal_sizes(self, runner, tmp_path):
        d1 = tl.PersistenceDiagram((tl.PersistencePair(0, 0.0, 4.0),))
        d2 = tl.PersistenceDiagram((tl.PersistencePair(0, 0.0, 4.0),
                                    tl.PersistencePair(0, 1.0, 1.5)))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        tl.write_diagram(d1, p1)
        tl.write_diagram(d2, p2)
        result = run(runner, "dist", p1, p2, "--mode", "diagonal-augmented",
                     "--stabilization", "log-domain")
        assert result.exit_code == 0
        assert math.isfinite(float(result.output.strip()))

    def test_plan_dump(self, runner, reference_csvs, tmp_path):
        plan_path = tmp_path / "plan.csv"
        result = run(runner, "dist", *reference_csvs, "--plan", plan_path)
        assert result.exit_code == 0
        rows = [[float(x) for x in line.split(",")]
                for line in plan_path.read_text().strip().splitlines()]
        assert np.abs(np.array(rows) - np.array(
            [[0.999, 0, 0], [0.001, 0.999, 0], [0, 0.001, 0.999]])).max() <= 2e-3

    def test_missing_file(self, runner, tmp_path):
        result = run(runner, "dist", tmp_path / "x.csv", tmp_path / "y.csv")
        assert result.exit_code == 1

    def test_unknown_flag_rejected(self, runner, reference_csvs):
        result = run(runner, "dist", *reference_csvs, "--frobnicate", "1")
        assert result.exit_code == 2


class TestLoss:
    @pytest.fixture
    def fixture_paths(self, tmp_path):
        dims = (9, 5, 5)
        blob = tl.generate_phantom("two-blobs", dims)
        mask = tl.LabelMask(dims, (blob.values < 0.5).astype(int), 2)
        hot = tl.one_hot(mask)
        paths = []
        for c in range(2):
            p = tmp_path / f"p{c}.vol"
            tl.save_volume(tl.Volume3D(dims, hot.probs[c]), p)
            paths.append(p)
        gt = tmp_path / "gt.vol"
        tl.save_labels(mask, gt)
        return paths, gt

    def test_perfect_prediction_report(self, runner, fixture_paths, tmp_path):
        (p0, p1), gt = fixture_paths
        out = tmp_path / "report.json"
        result = run(runner, "loss", "--probs", f"{p0},{p1}", "--gt", gt, "--out", out)
        assert result.exit_code == 0
        doc = json.loads(out.read_text())
        assert doc["focal"] == 0.0
        assert doc["topo_total"] <= 1e-6
        assert doc["total"] == doc["focal"] + doc["lambda"] * doc["topo_total"]

    def test_lambda_zero_config(self, runner, fixture_paths, tmp_path):
        (p0, p1), gt = fixture_paths
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"lambda": 0.0}))
        out = tmp_path / "report.json"
        result = run(runner, "loss", "--probs", f"{p0},{p1}", "--gt", gt,
                     "--config", cfg, "--out", out)
        assert result.exit_code == 0
        doc = json.loads(out.read_text())
        assert doc["total"] == doc["focal"]

    def test_unknown_config_key(self, runner, fixture_paths, tmp_path):
        (p0, p1), gt = fixture_paths
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        result = run(runner, "loss", "--probs", f"{p0},{p1}", "--gt", gt,
                     "--config", cfg, "--out", tmp_path / "r.json")
        assert result.exit_code == 2

    def test_missing_gt(self, runner, fixture_paths, tmp_path):
        (p0, p1), _ = fixture_paths
        result = run(runner, "loss", "--probs", f"{p0},{p1}",
                     "--gt", tmp_path / "nope.vol", "--out", tmp_path / "r.json")
        assert result.exit_code == 1


class TestBetti:
    def test_hollow_shell(self, runner, tmp_path):
        vol = tmp_path / "s.vol"
        run(runner, "gen", "--kind", "hollow-shell", "--dims", "9,9,9", "--out", vol)
        result = run(runner, "betti", vol, "--threshold", "0.5")
        assert result.exit_code == 0
        assert result.output.strip() == "1 0 1"

    def test_solid_ball(self, runner, tmp_path):
        vol = tmp_path / "b.vol"
        run(runner, "gen", "--kind", "solid-ball", "--dims", "9,9,9", "--out", vol)
        result = run(runner, "betti", vol, "--threshold", "0.5")
        assert result.exit_code == 0
        assert result.output.strip() == "1 0 0"

    def test_oversized_volume(self, runner, tmp_path):
        vol = tmp_path / "big.vol"
        run(runner, "gen", "--kind", "constant", "--dims", "20,20,20", "--out", vol)
        result = run(runner, "betti", vol, "--threshold", "0.5")
        assert result.exit_code == 3


class TestDeterminism:
    def test_gen_pd_byte_identical_across_runs(self, runner, tmp_path):
        outputs = []
        for tag in ("one", "two"):
            vol = tmp_path / f"{tag}.vol"
            csv = tmp_path / f"{tag}.csv"
            r1 = run(runner, "gen", "--kind", "two-blobs", "--dims", "9,5,5", "--out", vol)
            r2 = run(runner, "pd", vol, "--out", csv)
            assert r1.exit_code == 0 and r2.exit_code == 0
            outputs.append((vol.read_bytes(), csv.read_bytes(), r2.output))
        assert outputs[0] == outputs[1]

    def test_version(self, runner):
        result = run(runner, "--version")
        assert result.exit_code == 0
        assert tl.__version__ in result.output
