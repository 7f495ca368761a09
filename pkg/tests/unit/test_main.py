"""
Unit tests for the command-line entry point (run in-process)
"""
import json

import pytest

from main import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, build_parser, main


@pytest.fixture
def tet_file(tmp_path):
    path = str(tmp_path / "tet.json")
    assert main(["--quiet", "build", "--domain", "tet", "--out", path]) == EXIT_PASS
    return path


class TestParser:
    def test_verify_arguments(self):
        args = build_parser().parse_args(["verify", "--in", "a.json", "--report", "r.json", "--tol", "1e-8"])
        assert args.command == "verify"
        assert args.input == "a.json"
        assert args.tol == 1e-8

    def test_build_needs_a_source(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["build", "--out", "x.json"])

    def test_unknown_domain(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["build", "--domain", "torus", "--out", "x.json"])

    def test_non_positive_n_is_a_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["build", "--domain", "cube", "--n", "0", "--out", str(tmp_path / "x.json")])
        assert excinfo.value.code == EXIT_USAGE


class TestCommands:
    def test_verify_passes(self, tet_file, tmp_path, capsys):
        report = tmp_path / "report.json"
        code = main(["--quiet", "verify", "--in", tet_file, "--report", str(report), "--samples", "200"])
        assert code == EXIT_PASS
        assert capsys.readouterr().out.startswith("PASS")
        document = json.loads(report.read_text())
        assert document["verdict"] == "PASS"
        assert document["samples"] == 200
        assert document["cohomology"]["trace"] == [1, 0, 1]

    def test_cohomology(self, tet_file, capsys):
        assert main(["--quiet", "cohomology", "--in", tet_file, "--which", "trace"]) == EXIT_PASS
        assert "(1, 0, 1)" in capsys.readouterr().out

    def test_regular_blocks_verify(self, tet_file, tmp_path):
        blocks = str(tmp_path / "regular.json")
        assert main(["--quiet", "regular", "--in", tet_file, "--out", blocks]) == EXIT_PASS
        code = main(["--quiet", "verify", "--in", tet_file, "--regular", blocks,
                     "--report", str(tmp_path / "report.json"), "--samples", "100"])
        assert code == EXIT_PASS

    def test_missing_instance(self, tmp_path):
        code = main(["--quiet", "verify", "--in", str(tmp_path / "absent.json"),
                     "--report", str(tmp_path / "r.json")])
        assert code == EXIT_USAGE

    def test_bad_n_list(self, tmp_path):
        code = main(["--quiet", "refine", "--n-list", "1,x", "--probe", "constant-one",
                     "--report", str(tmp_path / "r.csv")])
        assert code == EXIT_USAGE

    def test_bad_config_file(self, tet_file, tmp_path):
        code = main(["--quiet", "--config", str(tmp_path / "absent.json"), "cohomology",
                     "--in", tet_file, "--which", "domain"])
        assert code == EXIT_USAGE

    def test_exit_codes_are_distinct(self):
        assert len({EXIT_PASS, EXIT_FAIL, EXIT_USAGE}) == 3
