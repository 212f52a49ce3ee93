import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from igac.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from igac.errors import ContractError
from igac.study import (
    CSV_COLUMNS,
    ConvergenceRecord,
    StudyConfig,
    emit_csv,
    format_csv,
    load_config,
    observed_orders,
    run_study,
)

GOLDEN = Path(__file__).parent / "data" / "source-1d-k7-seed42.csv"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def record(k=0, **kw):
    base = dict(k=k, rho=1.0, ln_rho=0.0, norm_Tr=1.0, norm_DTr=2.0, ratio=2.0, err_Tr=0.1,
                err_DTr=0.2, observed_order=math.nan, cond_est=3.0, wall_ms=1.5)
    return ConvergenceRecord(**{**base, **kw})


class TestConfig:
    @pytest.mark.parametrize("kw", [{"k_max": 2}, {"samples": 3}, {"scheme": "gauss"}, {"problem": "disk"}])
    def test_invalid(self, kw):
        with pytest.raises(ContractError):
            StudyConfig(**{"problem": "source-1d", **kw})

    def test_sampling_defaults(self):
        assert StudyConfig("cube-3d").sampling(3).samples == 8
        assert StudyConfig("source-1d").sampling(1).samples == 32
        assert StudyConfig("source-1d", samples=6, seed=4).sampling(1).seed == 4

    def test_load_config(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[study]\nproblem = annulus-2d\nkmax = 4\nbounds = yes\n")
        assert load_config(path) == {"problem": "annulus-2d", "k_max": 4, "bounds": True}

    @pytest.mark.parametrize("text", ["[other]\nx = 1\n", "[study]\ncolour = red\n", "[study]\nseed = two\n"])
    def test_load_config_errors(self, tmp_path, text):
        path = tmp_path / "bad.ini"
        path.write_text(text)
        with pytest.raises(ContractError):
            load_config(path)


class TestCsv:
    def test_single_record(self):
        text = format_csv([record()])
        lines = text.split("\n")
        assert text.endswith("\n") and len(lines) == 3 and lines[-1] == ""
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].split(",")[-1] == "nan"

    def test_timing_kept_on_request(self):
        assert format_csv([record()], timing=True).split("\n")[1].endswith(",1.5")

    def test_empty(self, tmp_path):
        with pytest.raises(ContractError):
            emit_csv([], tmp_path / "x.csv")

    def test_precision(self, tmp_path):
        path = emit_csv([record(rho=1 / 3)], tmp_path / "deep" / "c.csv")
        rho = path.read_text().split("\n")[1].split(",")[1]
        assert len(rho.replace("0.", "")) >= 12 and float(rho) == pytest.approx(1 / 3, rel=1e-14)

    def test_observed_orders(self):
        o = observed_orders([1, 0.5, 0.25], [1.0, 0.25, 0.0625])
        assert math.isnan(o[0]) and o[1:] == pytest.approx([2.0, 2.0])
        assert math.isnan(observed_orders([1, 0.5], [1.0, 0.0])[1])


@pytest.fixture(scope="module")
def source15():
    return run_study(StudyConfig("source-1d", k_max=15))


class TestRunStudy:
    def test_records(self, source15):
        r = source15.records
        assert [x.k for x in r] == list(range(16))
        assert all(x.rho == pytest.approx(1 / (x.k + 1)) and x.ln_rho == pytest.approx(math.log(x.rho)) for x in r)
        assert all(x.ratio == pytest.approx(x.norm_DTr / x.norm_Tr) for x in r)

    def test_verdict(self, source15):
        assert source15.verdict == "consistent-indicated"
        assert source15.report["ratio"]["last"] == pytest.approx(1 + 4 * np.pi**2, rel=0.02)

    def test_orders_positive_on_fine_levels(self, source15):
        assert all(r.observed_order > 1 for r in source15.records[8:])

    def test_short_study_verdict(self):
        # three levels past the coarse transient are not yet within 5% of each other
        res = run_study(StudyConfig("source-1d", k_max=7))
        assert res.verdict in ("consistent-indicated", "inconclusive")
        assert res.report["ratio"]["variation"] < 0.15

    def test_outputs(self, tmp_path):
        out = tmp_path / "run"
        res = run_study(StudyConfig("annulus-2d", k_max=3, samples=4, out=str(out), bounds=True, norms=True))
        names = sorted(p.name for p in out.iterdir())
        assert names == ["bounds.json", "convergence.csv", "norms.csv", "verdict.json"]
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["verdict"] == res.verdict and verdict["problem"] == "annulus-2d"
        bounds = json.loads((out / "bounds.json").read_text())
        assert {b["level"] for b in bounds} == {0, 1, 2, 3}
        assert len((out / "norms.csv").read_text().splitlines()) == 5

    def test_singular_level_tagged(self):
        from igac.errors import SingularSystemError

        with pytest.raises(SingularSystemError, match="level k=1"):
            run_study(StudyConfig("intro-1d", k_max=3))


class TestCli:
    def test_list(self):
        code, out, _ = run("list")
        assert code == EXIT_OK and out.split() == ["intro-1d", "source-1d", "annulus-2d", "cube-3d"]

    def test_study_stdout(self):
        code, out, err = run("study", "--problem", "source-1d", "--kmax", "7")
        assert code == EXIT_OK
        assert out.splitlines()[0] == ",".join(CSV_COLUMNS) and len(out.splitlines()) == 9
        assert err.startswith("verdict: ")

    def test_golden_file(self):
        code, out, _ = run("study", "--problem", "source-1d", "--kmax", "7", "--seed", "42")
        assert code == EXIT_OK and out == GOLDEN.read_text()

    def test_byte_identical_files(self, tmp_path):
        for d in ("a", "b"):
            assert run("study", "--problem", "source-1d", "--kmax", "7", "--seed", "42", "--out", str(tmp_path / d))[0] == 0
        assert (tmp_path / "a" / "convergence.csv").read_bytes() == (tmp_path / "b" / "convergence.csv").read_bytes()

    @pytest.mark.parametrize(
        "argv",
        [
            ("study", "--problem", "source-1d", "--kmax", "2"),
            ("study", "--problem", "nowhere", "--kmax", "4"),
            ("study", "--kmax", "4"),
            ("study", "--problem", "source-1d", "--samples", "2", "--kmax", "4"),
            ("study", "--problem", "source-1d", "--kmax", "4", "--frobnicate"),
            ("explode",),
            (),
            ("study", "--config", "/nonexistent/study.ini"),
        ],
    )
    def test_usage_errors(self, argv):
        code, _, err = run(*argv)
        assert code == EXIT_USAGE and err

    def test_numerical_failure(self):
        code, _, err = run("study", "--problem", "intro-1d", "--kmax", "3")
        assert code == EXIT_NUMERICAL and "level k=1" in err

    def test_config_and_override(self, tmp_path):
        cfg = tmp_path / "s.ini"
        cfg.write_text("[study]\nproblem = source-1d\nk_max = 3\nseed = 1\n")
        code, out, _ = run("study", "--config", str(cfg))
        assert code == EXIT_OK and len(out.splitlines()) == 5
        code, out, _ = run("study", "--config", str(cfg), "--kmax", "5")
        assert code == EXIT_OK and len(out.splitlines()) == 7

    def test_verify(self):
        code, out, _ = run("verify")
        assert code == EXIT_OK and out.strip().endswith("7/7 checks passed")

    def test_module_entry_point(self):
        import subprocess
        import sys

        res = subprocess.run([sys.executable, "-m", "igac", "list"], capture_output=True, text=True)
        assert res.returncode == 0 and "cube-3d" in res.stdout
