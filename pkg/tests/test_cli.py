import csv
import io
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pytest

from crdra import cli

GOLDEN = Path(__file__).parent / "golden"


def run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main(argv)
    return code, out.getvalue(), err.getvalue()


def read_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# -- golden regressions -----------------------------------------------------


@pytest.mark.parametrize("argv,golden", [
    (["fig2", "--seed", "1"], "fig2_seed1.csv"),
    (["diversity", "--seed", "7"], "diversity_seed7.csv"),
    (["dra", "--seed", "3"], "dra_seed3.csv"),
])
def test_golden_csv_byte_identical(argv, golden, tmp_path):
    out_path = tmp_path / "out.csv"
    code, _, _ = run_cli(argv + ["--out", str(out_path)])
    assert code == 0
    assert out_path.read_bytes() == (GOLDEN / golden).read_bytes()


def test_repeat_run_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(["diversity", "--seed", "11", "--out", str(a)])[0] == 0
    assert run_cli(["diversity", "--seed", "11", "--out", str(b)])[0] == 0
    assert a.read_bytes() == b.read_bytes()


# -- fig2 contract ----------------------------------------------------------


def test_fig2_row_count_and_dominance():
    code, out, _ = run_cli(["fig2", "--seed", "1"])
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 80  # 20 sweep points x (optimal + 3 projections)
    by_p = {}
    for r in rows:
        by_p.setdefault(r["P"], {})[r["method"]] = float(r["rate_bits"])
    for d in by_p.values():
        assert set(d) == {"optimal", "proj_b0", "proj_b1", "proj_b2"}
        for m, v in d.items():
            assert v <= d["optimal"] + 1e-4


def test_fig2_infinite_interference_budget_makes_b0_optimal(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("Gamma = inf\nsteps = 3\n")
    code, out, _ = run_cli(["fig2", "--seed", "2", "--config", str(cfg)])
    assert code == 0
    by_p = {}
    for r in read_rows(out):
        by_p.setdefault(r["P"], {})[r["method"]] = float(r["rate_bits"])
    for d in by_p.values():
        assert d["proj_b0"] == pytest.approx(d["optimal"], abs=1e-4)


# -- experiment outputs -----------------------------------------------------


def test_diversity_randomization_gain_column():
    code, out, _ = run_cli(["diversity", "--seed", "4"])
    assert code == 0
    (row,) = read_rows(out)
    assert float(row["C_p_II"]) >= float(row["C_p_I"])
    assert float(row["se_diff"]) > 0


def test_dra_relative_gap_small(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("L = 300\n")
    code, out, _ = run_cli(["dra", "--seed", "8", "--config", str(cfg)])
    assert code == 0
    rows = {r["method"]: r for r in read_rows(out)}
    assert set(rows) == {"mac_wsr", "tdma"}
    assert float(rows["tdma"]["rel_gap_to_full"]) <= 0.01
    assert rows["mac_wsr"]["status"] == "ok"


def test_sinr_balance_output():
    code, out, _ = run_cli(["sinr-balance", "--seed", "5"])
    assert code == 0
    (row,) = read_rows(out)
    assert float(row["alpha"]) > 0
    assert row["status"] == "ok"


def test_ic_wsr_small_config(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('K = 2\nA = 2\nB = 2\nstrategy = "own_rate"\n')
    code, out, _ = run_cli(["ic-wsr", "--seed", "2", "--config", str(cfg)])
    assert code == 0
    (row,) = read_rows(out)
    assert float(row["objective_bits"]) > 0


def test_mac_wsr_small_config(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("M = 2\nN = 1\nJ = 1\nGamma = 0.2\n")
    code, out, _ = run_cli(["mac-wsr", "--seed", "3", "--config", str(cfg)])
    assert code == 0
    (row,) = read_rows(out)
    assert float(row["gap"]) <= 1e-5 + 1e-9


def test_bc_wsr_small_config(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("M = 2\nN = 1\nJ = 1\nGamma = 0.2\n")
    code, out, _ = run_cli(["bc-wsr", "--seed", "3", "--config", str(cfg)])
    assert code == 0
    (row,) = read_rows(out)
    assert float(row["objective_bits"]) > 0


def test_selftest_passes():
    code, out, _ = run_cli(["selftest", "--seed", "0"])
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln]
    assert lines and all(ln.startswith("[PASS]") for ln in lines)


# -- error handling ---------------------------------------------------------


def test_missing_seed_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args(["fig2"])
    assert exc.value.code == 2


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("bogus_key = 1\n")
    code, _, err = run_cli(["fig2", "--seed", "1", "--config", str(cfg)])
    assert code == 2
    assert "bogus_key" in err


def test_malformed_config_exits_2(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("not [valid toml\n")
    code, _, _ = run_cli(["fig2", "--seed", "1", "--config", str(cfg)])
    assert code == 2


def test_bad_strategy_exits_2(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('strategy = "nope"\n')
    code, _, _ = run_cli(["ic-wsr", "--seed", "1", "--config", str(cfg)])
    assert code == 2


def test_bad_sweep_exits_2(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("steps = 0\n")
    code, _, _ = run_cli(["fig2", "--seed", "1", "--config", str(cfg)])
    assert code == 2
