import csv
import io
import math

import pytest

from tsdde.cli import main, summary_path
from tsdde.config import load_config
from tsdde.errors import ConfigError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_simulate_preset_matches_limit(capsys):
    code, out, err = run(capsys, "simulate", "--preset", "example_2_1")
    assert code == 0 and err == ""
    table = rows(out)
    assert table[0] == ["t", "x"]
    last = table[-1]
    assert float(last[0]) == 60.0
    assert float(last[1]) == pytest.approx(math.e / (math.e - 1), abs=1e-9)
    # 17 significant digits round-trip
    assert all(float(format(float(v), ".17g")) == float(v) for _, v in table[1:50])


def test_zero_coefficient_keeps_initial_value(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[equation]\nscale = interval -1 5\nA = 0\nalpha = t - 1\nt0 = 0\nx0 = 2.5\n[numerics]\nh_max = 0.5\n")
    out = tmp_path / "x.csv"
    code, _, err = run(capsys, "simulate", "--config", str(cfg), "--out", str(out))
    assert code == 0, err
    vals = [float(r[1]) for r in rows(out.read_text())[1:]]
    assert vals and all(v == 2.5 for v in vals)


def test_malformed_expression_exit_2(capsys):
    code, _, err = run(capsys, "simulate", "--set", "scale=interval 0 5", "--set", "A=1 +* t", "--set", "alpha=t")
    assert code == 2
    assert err.startswith("ERROR ") and "column" in err
    assert err.count("\n") == 1


def test_preset_with_equation_key_is_rejected(capsys):
    code, _, err = run(capsys, "simulate", "--preset", "r_const", "--set", "A=1")
    assert code == 2 and "ConfigError" in err


def test_fundamental_outputs(tmp_path, capsys):
    out = tmp_path / "fld.csv"
    code, _, err = run(capsys, "fundamental", "--preset", "example_5_3", "--out", str(out))
    assert code == 0, err
    long = rows(out.read_text())
    assert long[0] == ["s", "t", "X"]
    diag = [r for r in long[1:] if r[0] == r[1]]
    assert diag and all(float(r[2]) == 1.0 for r in diag)
    summ = rows((tmp_path / "fld_summary.csv").read_text())
    assert summ[0] == ["s", "max_abs_X", "decay_fit_lambda"]
    assert all(float(r[1]) <= 1.0 + 1e-12 for r in summ[1:])


def test_fundamental_r_const_is_bounded_by_one(capsys):
    code, out, _ = run(capsys, "fundamental", "--preset", "r_const", "--horizon", "20", "--s-samples", "8")
    assert code == 0
    long_text, summ_text = out.split("\n\n")
    summ = rows(summ_text)
    assert len(summ) == 9
    assert all(float(r[1]) <= 1.0 + 1e-6 for r in summ[1:])


def test_fundamental_is_deterministic_across_workers(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path, k in ((a, "1"), (b, "3")):
        assert run(capsys, "fundamental", "--preset", "example_5_1", "--horizon", "10", "--parallel", k, "--out", str(path))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a_summary.csv").read_bytes() == (tmp_path / "b_summary.csv").read_bytes()


@pytest.mark.parametrize(
    "preset, a, verdict",
    [
        ("example_5_1", "0.5", "UniformlyExponentiallyStable"),
        ("example_5_1", "1.0", "UniformlyStable"),
        ("example_5_2", "0.5", "GloballyAsymptoticallyStable"),
    ],
)
def test_classify_verdicts(capsys, preset, a, verdict):
    code, out, _ = run(capsys, "classify", "--preset", preset, "--set", f"a={a}")
    assert code == 0
    assert f"verdict = {verdict}" in out.splitlines()


def test_verify_example(capsys):
    code, out, _ = run(capsys, "verify-example", "eigen_sharpness")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 3 and all(line.startswith("PASS eigen_sharpness") for line in lines)
    code, _, err = run(capsys, "verify-example", "bogus")
    assert code == 2 and err.startswith("ERROR UnknownExample")


def test_list_examples(capsys):
    code, out, _ = run(capsys, "list-examples")
    assert code == 0
    names = {line.split("\t")[0] for line in out.splitlines()}
    assert {"example_2_1", "example_5_1", "example_5_2", "example_5_3", "pantograph", "eigen_sharpness"} <= names


def test_unknown_subcommand_is_a_usage_error(capsys):
    assert run(capsys, "frobnicate")[0] == 2


def test_config_file_loading(tmp_path):
    (tmp_path / "scale.txt").write_text("interval -1 3\npoint 4\n")
    cfg = load_config(text="scale = @scale.txt\nA = 0.5\nalpha = t - 1\ns_samples = 0, 1.5\n")
    cfg.base_dir = tmp_path
    st = cfg.build()
    assert st.eq.ts.t_max == 4.0
    assert cfg.s_samples == [0.0, 1.5]
    with pytest.raises(ConfigError):
        load_config(text="horizon = soon\n")


def test_summary_path():
    assert summary_path("/x/run.csv") == "/x/run_summary.csv"
