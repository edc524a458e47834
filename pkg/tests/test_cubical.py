import math

import numpy as np
import pytest

import topoloss as tl
from topoloss.cubical import _flood_fill_components


def random_small_volume(rng, dims=(6, 6, 6), max_levels=5):
    nvals = int(rng.integers(2, max_levels + 1))
    levels = np.sort(rng.uniform(-1.0, 1.0, nvals))
    return tl.Volume3D(dims, levels[rng.integers(0, nvals, dims)])


class TestPersistenceBasics:
    def test_constant_volume(self):
        v = tl.generate_phantom("constant", (3, 4, 2), {"value": 1.5})
        d = tl.sublevel_persistence(v)
        assert d.pairs == (tl.PersistencePair(0, 1.5, math.inf),)

    def test_fig2_line_barcodes(self):
        d = tl.sublevel_persistence(tl.generate_phantom("fig2-line", (5, 1, 1)))
        assert d.pairs == (
            tl.PersistencePair(0, -2.0, math.inf),
            tl.PersistencePair(0, -1.0, 1.0),
            tl.PersistencePair(0, -1.0, 2.0),
        )

    def test_single_voxel(self):
        d = tl.sublevel_persistence(tl.Volume3D((1, 1, 1), np.array([[[4.0]]])))
        assert d.pairs == (tl.PersistencePair(0, 4.0, math.inf),)

    def test_no_nonpositive_persistence(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            d = tl.sublevel_persistence(random_small_volume(rng))
            for p in d.pairs:
                assert p.death > p.birth

    def test_deterministic_under_ties(self):
        vals = np.zeros((4, 4, 4))
        vals[::2] = 1.0
        v = tl.Volume3D((4, 4, 4), vals)
        assert tl.sublevel_persistence(v) == tl.sublevel_persistence(v)

    def test_pair_validation(self):
        with pytest.raises(ValueError):
            tl.PersistencePair(0, 1.0, 1.0)
        with pytest.raises(ValueError):
            tl.PersistencePair(3, 0.0, 1.0)


class TestPhantomTopology:
    def test_solid_ball(self):
        v = tl.generate_phantom("solid-ball", (9, 9, 9))
        assert tl.betti_oracle(v, 0.5) == (1, 0, 0)
        assert tl.sublevel_persistence(v).betti_at(0.5) == (1, 0, 0)

    def test_hollow_shell(self):
        v = tl.generate_phantom("hollow-shell", (9, 9, 9))
        assert tl.betti_oracle(v, 0.5) == (1, 0, 1)
        assert tl.sublevel_persistence(v).betti_at(0.5) == (1, 0, 1)

    def test_shell_cavity_class_spans_shell_thresholds(self):
        # while only the shell is active, exactly one dim-2 class is alive
        v = tl.generate_phantom("hollow-shell", (7, 7, 7))
        d = tl.sublevel_persistence(v)
        for t in (0.0, 0.25, 0.75):
            alive = [p for p in d.in_dim(2) if p.birth <= t < p.death]
            assert len(alive) == 1

    def test_solid_torus(self):
        v = tl.generate_phantom("solid-torus", (9, 9, 3))
        assert tl.betti_oracle(v, 0.5) == (1, 1, 0)
        assert tl.sublevel_persistence(v).betti_at(0.5) == (1, 1, 0)

    def test_two_blobs(self):
        v = tl.generate_phantom("two-blobs", (9, 5, 5))
        assert tl.betti_oracle(v, 0.5) == (2, 0, 0)
        assert tl.sublevel_persistence(v).betti_at(0.5) == (2, 0, 0)


class TestBettiConsistency:
    def test_random_volumes_match_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(10):
            v = random_small_volume(rng)
            d = tl.sublevel_persistence(v)
            for t in np.unique(v.values):
                assert d.betti_at(float(t)) == tl.betti_oracle(v, float(t))

    def test_non_cubic_volumes_match_oracle(self):
        rng = np.random.default_rng(2025)
        for dims in [(1, 1, 1), (7, 1, 1), (1, 4, 3), (6, 2, 5)]:
            nvals = int(rng.integers(1, 7))
            levels = rng.uniform(-3, 3, nvals)
            v = tl.Volume3D(dims, levels[rng.integers(0, nvals, dims)])
            d = tl.sublevel_persistence(v)
            for t in np.unique(v.values):
                assert d.betti_at(float(t)) == tl.betti_oracle(v, float(t))

    def test_oracle_cell_cap(self):
        v = tl.generate_phantom("constant", (20, 20, 20))
        with pytest.raises(tl.ComplexTooLargeError):
            tl.betti_oracle(v, 0.5)


class TestCriticalValues:
    def test_pair_values_are_voxel_values(self):
        # critical values come from the data, never a quantization ladder
        rng = np.random.default_rng(2026)
        v = random_small_volume(rng, dims=(5, 4, 3))
        voxel_values = set(v.values.ravel().tolist())
        for p in tl.sublevel_persistence(v).pairs:
            assert p.birth in voxel_values
            assert p.essential or p.death in voxel_values

    def test_max_dim_truncates_output(self):
        v = tl.generate_phantom("hollow-shell", (7, 7, 7))
        full = tl.sublevel_persistence(v, max_dim=2)
        for max_dim in (0, 1):
            d = tl.sublevel_persistence(v, max_dim=max_dim)
            assert all(p.dim <= max_dim for p in d.pairs)
            for k in range(max_dim + 1):
                assert d.in_dim(k) == full.in_dim(k)


class TestDiagramTransforms:
    def test_shift_equivariance(self):
        rng = np.random.default_rng(31)
        v = random_small_volume(rng, dims=(5, 5, 5))
        c = 0.375  # power-of-two fraction: shifted values compare exactly
        shifted = tl.Volume3D(v.dims, v.values + c)
        d0 = tl.sublevel_persistence(v)
        d1 = tl.sublevel_persistence(shifted)
        expected = [
            (p.dim, p.birth + c, p.death + c if not p.essential else math.inf)
            for p in d0.pairs
        ]
        got = [(p.dim, p.birth, p.death) for p in d1.pairs]
        assert sorted(expected) == sorted(got)

    def test_monotone_reparameterization(self):
        rng = np.random.default_rng(32)
        v = random_small_volume(rng, dims=(5, 5, 5))

        def f(x):
            return x**3 + 2.0 * x

        d0 = tl.sublevel_persistence(v)
        d1 = tl.sublevel_persistence(tl.Volume3D(v.dims, f(v.values)))
        expected = sorted(
            (p.dim, float(f(np.float64(p.birth))), math.inf if p.essential else float(f(np.float64(p.death))))
            for p in d0.pairs
        )
        got = sorted((p.dim, p.birth, p.death) for p in d1.pairs)
        assert expected == got

    def test_essential_count_matches_full_complex_components(self):
        rng = np.random.default_rng(33)
        v = random_small_volume(rng, dims=(4, 4, 4))
        d = tl.sublevel_persistence(v)
        essential0 = [p for p in d.in_dim(0) if p.essential]
        # the full complex is the whole solid box: one component
        assert len(essential0) == 1


class TestDiagramCsv:
    def test_write_format(self, tmp_path):
        d = tl.PersistenceDiagram((tl.PersistencePair(0, -2.0, math.inf),))
        path = tmp_path / "d.csv"
        tl.write_diagram(d, path)
        assert path.read_text() == "dim,birth,death\n0,-2,inf\n"

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(40)
        v = random_small_volume(rng)
        d = tl.sublevel_persistence(v)
        path = tmp_path / "d.csv"
        tl.write_diagram(d, path)
        assert tl.read_diagram(path) == d

    def test_round_trip_byte_exact(self, tmp_path):
        rng = np.random.default_rng(41)
        d = tl.sublevel_persistence(random_small_volume(rng))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        tl.write_diagram(d, p1)
        tl.write_diagram(tl.read_diagram(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_diagram(self, tmp_path):
        path = tmp_path / "e.csv"
        tl.write_diagram(tl.PersistenceDiagram(()), path)
        assert path.read_text() == "dim,birth,death\n"
        assert tl.read_diagram(path).pairs == ()

    def test_rows_sorted(self, tmp_path):
        d = tl.PersistenceDiagram((
            tl.PersistencePair(1, 0.0, 2.0),
            tl.PersistencePair(0, 1.0, 3.0),
            tl.PersistencePair(0, 0.0, 1.0),
        ))
        path = tmp_path / "s.csv"
        tl.write_diagram(d, path)
        lines = path.read_text().strip().splitlines()[1:]
        assert lines == ["0,0,1", "0,1,3", "1,0,2"]

    @pytest.mark.parametrize("body", [
        "dim,birth\n",                      # bad header
        "dim,birth,death\n0,1\n",           # short row
        "dim,birth,death\n0,a,2\n",         # bad float
        "dim,birth,death\n0,1,huge\n",      # unknown token
        "dim,birth,death\n0,2,1\n",         # death <= birth
        "dim,birth,death\n0,nan,1\n",       # non-finite birth
    ])
    def test_malformed(self, tmp_path, body):
        path = tmp_path / "bad.csv"
        path.write_text(body)
        with pytest.raises(tl.DiagramFormatError):
            tl.read_diagram(path)


class TestOracleInternals:
    def test_flood_fill_counts_components(self):
        cells = {(0, 0, 0): 0, (1, 0, 0): 1, (2, 0, 0): 2, (4, 0, 0): 3}
        assert _flood_fill_components(cells) == 2
