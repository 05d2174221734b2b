import json

import numpy as np
import pytest

from fracocp.cli import (
    EXIT_CHECK,
    EXIT_CONFIG,
    EXIT_OK,
    GAMMA_COLUMNS,
    parse_config,
    main,
)
from fracocp.exceptions import ConfigurationError


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestParse:
    def test_minimal_defaults(self, tmp_path):
        cfg = parse_config(write(tmp_path, "command: solve\ns: 0.4\nn: 256\n"))
        assert (cfg.command, cfg.s, cfg.n) == ("solve", 0.4, 256)
        assert (cfg.a, cfg.b, cfg.u_b, cfg.alpha, cfg.mu_hat, cfg.u_d) == (-0.5, 0.5, 0.1, 1e-2, "0", "getoor")
        assert (cfg.gamma0, cfg.factor, cfg.count) == (0.1, 4.0, 13)
        assert cfg.explicit == {"command", "s", "n"}

    def test_comments_and_equals(self, tmp_path):
        cfg = parse_config(write(tmp_path, "# experiment\ns = 0.6  # order\nz_lo = 0\nz_hi=10\n"))
        assert cfg.problem().control_bounds == (0.0, 10.0)

    def test_overrides_win(self, tmp_path):
        cfg = parse_config(write(tmp_path, "s = 0.6\n"), ["s=0.7"])
        assert cfg.s == 0.7

    @pytest.mark.parametrize("text", [
        "s = 0.2", "s = 0.25", "bogus = 1", "n = 2.5", "alpha = -1", "z_lo = 1\nz_hi = 0",
        "command = fly", "factor = 1", "precision = 30", "checks = nope", "dump_matrices = maybe",
        "just text",
    ])
    def test_rejected(self, tmp_path, text):
        with pytest.raises(ConfigurationError):
            parse_config(write(tmp_path, text + "\n"))

    def test_gate_message(self, tmp_path):
        with pytest.raises(ConfigurationError, match="two dimensions"):
            parse_config(None, ["s=0.2"])

    def test_command_conflict(self, tmp_path):
        with pytest.raises(ConfigurationError):
            parse_config(write(tmp_path, "command = solve\n"), command="h-sweep")


class TestMain:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["solve", "--config", str(tmp_path / "nope.cfg"), "-q"]) == EXIT_CONFIG
        assert "not found" in capsys.readouterr().err

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["explode"])
        assert exc.value.code == EXIT_CONFIG

    def test_gamma_sweep_csv(self, tmp_path):
        out = tmp_path / "g.csv"
        args = ["gamma-sweep", "--set", "s=0.4", "--set", "n=32", "--set", "count=5",
                "--set", "z_lo=0", "--set", "z_hi=10", "--out", str(out), "-q"]
        assert main(args) == EXIT_OK
        text = out.read_text()
        lines = text.splitlines()
        assert lines[0] == ",".join(GAMMA_COLUMNS)
        assert len(lines) == 6 and text.endswith("\n")
        assert lines[1].startswith("0.10000000000000001,")
        first = out.read_bytes()
        assert main(args) == EXIT_OK
        assert out.read_bytes() == first

    def test_h_sweep_footer(self, tmp_path):
        out = tmp_path / "h.csv"
        args = ["h-sweep", "--set", "n=8", "--set", "levels=3", "--set", "reference_n=128",
                "--set", "gamma=100", "--out", str(out), "--workers", "2", "-q"]
        assert main(args) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "h,err_u_l2,err_z_l2"
        assert lines[-1].startswith("order,")
        assert len(lines) == 5

    def test_solve_and_dump(self, tmp_path):
        out = tmp_path / "sol.csv"
        args = ["solve", "--set", "n=16", "--set", "gamma=50", "--out", str(out), "--dump-matrices", "-q"]
        assert main(args) == EXIT_OK
        data = np.genfromtxt(out, delimiter=",", names=True)
        assert data.shape == (17,) and data["u"][0] == 0.0
        assert (tmp_path / "sol_A.txt").exists()

    def test_validate_fault_injection(self, tmp_path, capsys):
        out = tmp_path / "report.jsonl"
        code = main(["validate", "--set", "checks=assembly_oracle", "--inject-fault", "--out", str(out), "-q"])
        assert code == EXIT_CHECK
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(records) == 3 and not any(r["passed"] for r in records)

    def test_validate_passes(self, capsys):
        assert main(["validate", "--set", "checks=positive_part,gradient_fd", "-q"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert [json.loads(x)["name"] for x in lines] == ["positive_part_exactness", "gradient_fd"]
