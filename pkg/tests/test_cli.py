import csv
import json

import numpy as np
import pytest

from qfa.cli import main, parse_levels
from qfa.container import read_container
from qfa.errors import ValidationError


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def series_csv(workdir):
    path = workdir / "series.csv"
    rc = main(["simulate", "--n", "64", "--seed", "7", "--out", str(path)])
    assert rc == 0
    return path


LEVELS = "0.2:0.8:0.1"


class TestParseLevels:
    def test_grid(self):
        np.testing.assert_allclose(
            parse_levels("0.1:0.9:0.01"), np.linspace(0.1, 0.9, 81), atol=1e-12
        )

    def test_bad_spec(self):
        with pytest.raises(ValidationError):
            parse_levels("0.1:0.9")
        with pytest.raises(ValidationError):
            parse_levels("0.1:0.95:0.2")


class TestSimulate:
    def test_csv_shape_and_header(self, series_csv):
        with open(series_csv) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["y1", "y2"]
        assert len(rows) == 65
        float(rows[1][0])  # parses

    def test_deterministic(self, workdir):
        a = workdir / "a.csv"
        b = workdir / "b.csv"
        main(["simulate", "--n", "32", "--seed", "5", "--out", str(a)])
        main(["simulate", "--n", "32", "--seed", "5", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_default_shape_512(self, workdir):
        out = workdir / "d.csv"
        main(["simulate", "--seed", "1", "--out", str(out)])
        with open(out) as fh:
            assert len(fh.readlines()) == 513

    def test_config_file(self, workdir):
        cfg = workdir / "cfg.json"
        cfg.write_text(json.dumps({"sim": {"n": 16}, "seed": 3, "output": str(workdir / "c.csv")}))
        assert main(["simulate", "--config", str(cfg)]) == 0
        assert (workdir / "c.csv").exists()

    def test_config_schema_rejects_unknown_keys(self, workdir):
        cfg = workdir / "bad.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        assert main(["simulate", "--config", str(cfg)]) == 2


class TestPipeline:
    def test_qdft_qser_quantile_identity(self, workdir, series_csv):
        z = workdir / "z.qfa"
        assert main(["qdft", "--input", str(series_csv), "--levels", LEVELS,
                     "--out", str(z), "--threads", "1"]) == 0
        x = workdir / "x.qfa"
        assert main(["qser", "--input", str(z), "--out", str(x)]) == 0
        zc = read_container(z)
        xc = read_container(x)
        np.testing.assert_allclose(
            xc.x.mean(axis=-1), zc.z[:, :, 0].real / 64, atol=1e-8
        )

    def test_full_chain_kld(self, workdir, series_csv, capsys):
        z = workdir / "z.qfa"
        main(["qdft", "--input", str(series_csv), "--levels", LEVELS, "--out", str(z)])
        g = workdir / "g.qfa"
        assert main(["qacf", "--input", str(z), "--out", str(g)]) == 0
        s = workdir / "s.qfa"
        assert main(["lw", "--input", str(g), "--M", "8", "--out", str(s)]) == 0
        p = workdir / "p.qfa"
        assert main(["qper", "--input", str(z), "--out", str(p)]) == 0
        sm = workdir / "sm.qfa"
        assert main(["smooth", "--input", str(s), "--lambda-mode", "fixed",
                     "--lambda", "0.001", "--out", str(sm)]) == 0
        rc = main(["kld", "--est", str(sm), "--truth", str(sm)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["kld"] == pytest.approx(0.0, abs=1e-10)
        assert out["L"] == 7

    def test_smooth_dispatches_on_qdft(self, workdir, series_csv):
        z = workdir / "z.qfa"
        main(["qdft", "--input", str(series_csv), "--levels", LEVELS, "--out", str(z)])
        zs = workdir / "zs.qfa"
        assert main(["smooth", "--input", str(z), "--lambda-mode", "fixed",
                     "--lambda", "0.01", "--out", str(zs)]) == 0
        back = read_container(zs)
        from qfa.arrays import conjugate_symmetry_error

        assert conjugate_symmetry_error(back.z) == 0.0

    def test_sqdft_runs(self, workdir, series_csv):
        z = workdir / "zs.qfa"
        assert main(["sqdft", "--input", str(series_csv), "--levels", LEVELS,
                     "--mu", "4", "--out", str(z), "--threads", "1"]) == 0
        assert read_container(z).z.shape == (2, 7, 64)

    def test_thread_count_invariance(self, workdir, series_csv):
        a = workdir / "t1.qfa"
        b = workdir / "t2.qfa"
        main(["qdft", "--input", str(series_csv), "--levels", LEVELS,
              "--out", str(a), "--threads", "1"])
        main(["qdft", "--input", str(series_csv), "--levels", LEVELS,
              "--out", str(b), "--threads", "2"])
        assert a.read_bytes() == b.read_bytes()

    def test_idempotent_given_same_inputs(self, workdir, series_csv):
        a = workdir / "i1.qfa"
        b = workdir / "i2.qfa"
        for path in (a, b):
            main(["qdft", "--input", str(series_csv), "--levels", LEVELS,
                  "--out", str(path)])
        assert a.read_bytes() == b.read_bytes()


class TestExport:
    def test_qspec_diagonal_row_count(self, workdir, series_csv):
        z = workdir / "z.qfa"
        main(["qdft", "--input", str(series_csv), "--levels", LEVELS, "--out", str(z)])
        p = workdir / "p.qfa"
        main(["qper", "--input", str(z), "--out", str(p)])
        grid = workdir / "grid.csv"
        assert main(["export", "--input", str(p), "--j", "1", "--part", "real",
                     "--out", str(grid)]) == 0
        with open(grid) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["frequency", "level", "value"]
        assert len(rows) - 1 == 64 * 7

    def test_out_of_range_slice(self, workdir, series_csv):
        z = workdir / "z.qfa"
        main(["qdft", "--input", str(series_csv), "--levels", LEVELS, "--out", str(z)])
        assert main(["export", "--input", str(z), "--j", "9",
                     "--out", str(workdir / "no.csv")]) == 2


class TestExitCodes:
    def test_missing_input_is_io_error(self, workdir):
        assert main(["qser", "--input", str(workdir / "absent.qfa"),
                     "--out", str(workdir / "o.qfa")]) == 4

    def test_kind_mismatch_is_validation(self, workdir, series_csv):
        z = workdir / "z.qfa"
        main(["qdft", "--input", str(series_csv), "--levels", LEVELS, "--out", str(z)])
        s = workdir / "s2.qfa"
        assert main(["lw", "--input", str(z), "--M", "8", "--out", str(s)]) == 2

    def test_bad_levels_is_validation(self, workdir, series_csv):
        assert main(["qdft", "--input", str(series_csv), "--levels", "0.5:0.1:0.1",
                     "--out", str(workdir / "o.qfa")]) == 2
