import csv
import io
import os

import pytest

from rotseq.cli import main


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_run_csv_basic(capsys):
    code, out, err = run_cli(["run", "--algo", "naive", "--n", "64", "--k", "8", "--reps", "3"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "n,Flops"
    assert len(lines) == 2
    n, flops = lines[1].split(",")
    assert n == "64"
    assert float(flops) > 0
    # at least 6 significant digits
    digits = flops.replace(".", "").replace("-", "").lstrip("0")
    assert len(digits) >= 6
    assert "verified=ok" in err


def test_run_sweep_row_count(capsys, tmp_path):
    csv_path = tmp_path / "out.csv"
    code, out, err = run_cli(
        ["run", "--algo", "wavefront", "--sweep", "8:40:8", "--k", "2",
         "--reps", "1", "--csv", str(csv_path)],
        capsys,
    )
    assert code == 0
    rows = csv_path.read_text().strip().splitlines()
    assert rows[0] == "n,Flops"
    assert len(rows) == 1 + 5  # 8, 16, 24, 32, 40
    assert [r.split(",")[0] for r in rows[1:]] == ["8", "16", "24", "32", "40"]


def test_run_zero_sweep_header_only(capsys):
    code, out, _ = run_cli(
        ["run", "--algo", "naive", "--sweep", "20:10:5", "--k", "2"], capsys
    )
    assert code == 0
    assert out.strip() == "n,Flops"


def test_run_extended_csv(capsys):
    code, out, _ = run_cli(
        ["run", "--algo", "fused", "--n", "24", "--k", "3", "--reps", "1",
         "--csv-extended"],
        capsys,
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[0]["algo"] == "fused"
    assert rows[0]["verified"] == "True"
    assert rows[0]["m"] == "24" and rows[0]["k"] == "3"


def test_run_determinism_modulo_timing(capsys):
    args = ["run", "--algo", "kernel", "--n", "40", "--m", "28", "--k", "4",
            "--reps", "1", "--seed", "77", "--csv-extended"]
    code1, out1, _ = run_cli(args, capsys)
    code2, out2, _ = run_cli(args, capsys)
    assert code1 == code2 == 0
    rows1 = list(csv.DictReader(io.StringIO(out1)))
    rows2 = list(csv.DictReader(io.StringIO(out2)))
    drop = ("Flops", "seconds")
    strip = lambda r: {k: v for k, v in r.items() if k not in drop}
    assert [strip(r) for r in rows1] == [strip(r) for r in rows2]


def test_run_requires_n(capsys):
    code, _, err = run_cli(["run", "--algo", "naive"], capsys)
    assert code == 2
    assert "needs --n" in err


def test_run_wavefront_wide_k_usage_error(capsys):
    code, _, err = run_cli(["run", "--algo", "wavefront", "--n", "8", "--k", "20"], capsys)
    assert code == 2
    assert "apply_blocked" in err


def test_run_unknown_algo_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--algo", "warp", "--n", "8"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_run_strict_arith_flag(capsys):
    code, out, err = run_cli(
        ["run", "--algo", "kernel", "--n", "32", "--k", "3", "--reps", "1",
         "--strict-arith", "on"],
        capsys,
    )
    assert code == 0 and "verified=ok" in err


def test_run_reflector_kind(capsys):
    code, _, err = run_cli(
        ["run", "--algo", "kernel-prepacked", "--n", "48", "--k", "5",
         "--kind", "reflector", "--reps", "1"],
        capsys,
    )
    assert code == 0 and "verified=ok" in err


def test_run_threads(capsys):
    code, _, err = run_cli(
        ["run", "--algo", "kernel", "--n", "64", "--k", "4", "--threads", "2",
         "--reps", "1"],
        capsys,
    )
    assert code == 0 and "verified=ok" in err


def test_verify_quick_passes(capsys):
    code, out, err = run_cli(["verify", "--quick", "--kind", "rotation"], capsys)
    assert code == 0
    assert "cases passed" in out
    assert "FAIL" not in err


def test_verify_quick_reflector(capsys):
    code, out, _ = run_cli(["verify", "--quick", "--kind", "reflector"], capsys)
    assert code == 0


def test_verify_fault_injection(capsys):
    code, out, err = run_cli(
        ["verify", "--quick", "--kind", "rotation", "--perturb-kernel"], capsys
    )
    assert code == 1
    assert "FIRST FAILURE" in err
    assert "kernel" in err
    assert os.environ.get("ROTSEQ_PERTURB_KERNEL") is None


def test_model_reference_numbers(capsys):
    code, out, _ = run_cli(
        ["model", "--T1", "4000", "--T2", "32000", "--T3", "4480000",
         "--mr", "16", "--kr", "2"],
        capsys,
    )
    assert code == 0
    assert "n_b <= 220 (chosen 216)" in out
    assert "k_b <= 62 (chosen 60)" in out
    assert "m_b <= 16231 (chosen 4800)" in out
    assert "1.125" in out


def test_model_io_section(capsys):
    code, out, _ = run_cli(
        ["model", "--io", "--S", "10000", "--mb", "100", "--kb", "100",
         "--m", "300", "--n", "400", "--k", "50"],
        capsys,
    )
    assert code == 0
    # 4*m*n*k/sqrt(S) with sqrt(S) = 100
    assert f"{4 * 300 * 400 * 50 / 100.0:.6g}" in out
    assert "intensity wave" in out and "150" in out


def test_model_csv(capsys, tmp_path):
    path = tmp_path / "model.csv"
    code, _, _ = run_cli(["model", "--csv", str(path)], capsys)
    assert code == 0
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "formula_id,params,loads,stores,total,factor"
    assert len(rows) == 4
    assert rows[1].startswith("basic,")


def test_model_mr_8_5_factor(capsys):
    code, out, _ = run_cli(["model", "--mr", "8", "--kr", "5"], capsys)
    assert code == 0
    assert "0.65 + 2/n_b" in out


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "cache.conf"
    cfg.write_text(
        "# test cache\nT1 = 2000\nT2 = 16000\nT3 = 1000000\n"
        "m_b_cap = 512\nthreads = 1\n"
    )
    code, out, _ = run_cli(["model", "--config", str(cfg), "--mr", "16", "--kr", "2"], capsys)
    assert code == 0
    assert "T1=2000" in out
    assert "m_b=512" in out


def test_config_file_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cache.conf"
    cfg.write_text("T1=2000\n")
    code, out, _ = run_cli(["model", "--config", str(cfg), "--T1", "4000"], capsys)
    assert code == 0
    assert "T1=4000" in out


def test_config_file_bad_line(capsys, tmp_path):
    cfg = tmp_path / "cache.conf"
    cfg.write_text("T1: 2000\n")
    code, _, err = run_cli(["model", "--config", str(cfg)], capsys)
    assert code == 2
    assert "key=value" in err
