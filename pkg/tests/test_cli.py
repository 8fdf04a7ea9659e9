import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from asgdlab.cli import main
from asgdlab.config import (ExperimentConfig, parse_config, resolve_w0,
                            serialize_config)
from asgdlab.errors import ValidationError


def run_cli(args):
    proc = subprocess.run([sys.executable, "-m", "asgdlab.cli", *args],
                          capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def test_config_round_trip_default():
    cfg = ExperimentConfig()
    assert parse_config(serialize_config(cfg)) == cfg


def test_config_round_trip_modified():
    cfg = replace(ExperimentConfig(), d=37, delta=0.0123456789012345678,
                  s_list=(1, 2, 3), engines=("oracle",), w0="10*e_3",
                  spectrum_kind="exponential", spectrum_param=0.5)
    text = serialize_config(cfg)
    assert parse_config(text) == cfg
    # serialize is stable under a second round trip
    assert serialize_config(parse_config(text)) == text


def test_config_rejects_unknown_key():
    with pytest.raises(ValidationError, match="unknown key"):
        parse_config("no_such_field = 3")


def test_config_rejects_malformed_line():
    with pytest.raises(ValidationError, match="expected"):
        parse_config("just some words")


def test_resolve_w0_forms():
    np.testing.assert_array_equal(resolve_w0("zeros", 3), np.zeros(3))
    v = resolve_w0("10*e_2", 4)
    assert v[1] == 10.0 and np.count_nonzero(v) == 1
    np.testing.assert_allclose(resolve_w0("1.5,2.5,3.5", 3), [1.5, 2.5, 3.5])
    assert resolve_w0("e_1", 2)[0] == 1.0
    with pytest.raises(ValidationError):
        resolve_w0("10*e_9", 4)
    with pytest.raises(ValidationError):
        resolve_w0("1.0,2.0", 3)
    with pytest.raises(ValidationError):
        resolve_w0("what", 3)


def test_cutoffs_prints_paper_values(capsys):
    rc = main(["cutoffs", "--max-rows", "4"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "k_ddagger=0 k_hat=2 k_dagger=6 k_star=17" in out


def test_cutoffs_malformed_spectrum_exit_2():
    rc, _, err = run_cli(["cutoffs", "--spectrum-kind", "custom",
                          "--spectrum-custom", "1,2,3"])
    assert rc == 2
    assert "non-increasing" in err


def test_figa2_requires_custom_spectrum():
    rc, _, err = run_cli(["figure", "figA2", "--s-list", "50", "--reps", "1",
                          "--N", "20", "--d", "20", "--out", "/tmp/asgdlab_t1"])
    assert rc == 2
    assert "spectrum_custom" in err


def test_sweep_kappa_monotone(tmp_path, capsys):
    rc = main(["sweep-kappa", "--kappas", "1,2,5,8", "--s-list", "200",
               "--N", "500", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    lines = [l for l in (tmp_path / "sweep_kappa.csv").read_text().splitlines()
             if not l.startswith("#")]
    header = lines[0].split(",")
    rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
    ok_rows = [r for r in rows if r["status"] == "ok"]
    gammas = [float(r["gamma"]) for r in ok_rows]
    betas = [float(r["beta"]) for r in ok_rows]
    khats = [int(r["k_hat"]) for r in ok_rows]
    assert gammas == sorted(gammas)
    assert betas == sorted(betas, reverse=True)
    assert khats == sorted(khats)


def test_sweep_kappa_infeasible_rows(tmp_path):
    rc = main(["sweep-kappa", "--kappas", "0", "--out", str(tmp_path)])
    assert rc == 0
    text = (tmp_path / "sweep_kappa.csv").read_text()
    assert "infeasible" in text


def _strip_walltime(path):
    out = []
    for line in open(path):
        if line.startswith("#") or line.startswith("engine"):
            out.append(line)
        else:
            parts = line.rstrip("\n").split(",")
            out.append(",".join(parts[:-1]))
    return out


def test_figure_csv_deterministic(tmp_path):
    args = ["figure", "fig2c", "--d", "60", "--s-list", "20,40", "--reps", "2",
            "--N", "30", "--seed", "5"]
    rc = main(args + ["--out", str(tmp_path / "a")])
    assert rc == 0
    rc = main(args + ["--out", str(tmp_path / "b")])
    assert rc == 0
    a = _strip_walltime(tmp_path / "a" / "fig2c.csv")
    b = _strip_walltime(tmp_path / "b" / "fig2c.csv")
    assert a == b
    header = [l for l in a if l.startswith("#")]
    assert any("seed = 5" in l for l in header)
    assert any("w0 = 10*e_20" in l for l in header)


def test_figure_emits_bias_variance_columns(tmp_path):
    rc = main(["figure", "figA1", "--d", "60", "--s-list", "20", "--reps", "2",
               "--N", "30", "--out", str(tmp_path)])
    assert rc == 0
    for panel in ("figA1a", "figA1b"):
        lines = (tmp_path / f"{panel}.csv").read_text().splitlines()
        cols = [l for l in lines if l.startswith("engine")][0].split(",")
        assert "bias" in cols and "variance" in cols
        data = [l for l in lines if not (l.startswith("#") or l.startswith("engine"))]
        assert any(l.startswith("oracle") for l in data)
        assert any(l.startswith("montecarlo") for l in data)


def test_threads_do_not_change_output(tmp_path):
    base = ["figure", "fig2a", "--d", "50", "--s-list", "10,20", "--reps", "2",
            "--N", "20"]
    main(base + ["--threads", "1", "--out", str(tmp_path / "t1")])
    main(base + ["--threads", "4", "--out", str(tmp_path / "t4")])
    drop = lambda lines: [l for l in lines if not l.startswith("# threads")]
    assert (drop(_strip_walltime(tmp_path / "t1" / "fig2a.csv"))
            == drop(_strip_walltime(tmp_path / "t4" / "fig2a.csv")))


def test_compare_command(capsys):
    rc = main(["compare", "--max-rows", "8", "--s-list", "100", "--N", "500"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "k_hat=2" in out


def test_bound_command_runs(capsys):
    rc = main(["bound", "--s-list", "100", "--algorithms", "asgd,sgd,classical",
               "--d", "100", "--w0", "10*e_5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "bound asgd" in out and "bound sgd" in out and "bound classical" in out


def test_verify_fast_passes(capsys):
    rc = main(["verify", "--level", "fast"])
    assert rc == 0
    assert "all checks passed" in capsys.readouterr().out


def test_verify_detects_injected_bug(monkeypatch, capsys):
    import asgdlab.bounds as bounds_mod
    from asgdlab import bounds

    real = bounds.asgd_bound

    def broken(inst, hp, s, N, variant="appendix"):
        rep = real(inst, hp, s, N, variant=variant)
        object.__setattr__(rep, "effective_variance", rep.effective_variance * 1e-6)
        object.__setattr__(rep, "total", rep.total * 1e-6)
        return rep

    monkeypatch.setattr(bounds_mod, "asgd_bound", broken)
    rc = main(["verify", "--level", "fast"])
    assert rc == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "replay payload" in out
