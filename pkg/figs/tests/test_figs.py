import math
import shutil
import subprocess

import numpy as np
import pytest

from qmartin_figs import convergence, infima


def write_running_mean(path, n, mean, lo, hi):
    with open(path, "w") as fh:
        fh.write("n,mean,ci_lo,ci_hi\n")
        for row in zip(n, mean, lo, hi):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def write_infima(path, xi, cdf_mar, cdf_tot, se_mar, se_tot, gamma_t=None):
    with open(path, "w") as fh:
        if gamma_t is None:
            fh.write("xi,cdf_mar,cdf_tot,se_mar,se_tot,bound\n")
            for row in zip(xi, cdf_mar, cdf_tot, se_mar, se_tot):
                fh.write(",".join(f"{x:.17g}" for x in row)
                         + f",{math.exp(-row[0]):.17g}\n")
        else:
            fh.write("gamma_t,xi,cdf_mar,cdf_tot,se_mar,se_tot,bound\n")
            for gt, rows in gamma_t.items():
                for row in zip(*rows):
                    fh.write(f"{gt:g}," + ",".join(f"{x:.17g}" for x in row)
                             + f",{math.exp(-row[0]):.17g}\n")


@pytest.fixture()
def flat_csv(tmp_path):
    path = tmp_path / "flat.csv"
    n = np.arange(1, 101)
    write_running_mean(path, n, np.ones(100), np.ones(100) - 0.01,
                       np.ones(100) + 0.01)
    return path


def test_convergence_flat_line(tmp_path, flat_csv):
    out = tmp_path / "fig.svg"
    assert convergence.main(["--in", str(flat_csv), "--out", str(out)]) == 0
    assert out.exists() and out.stat().st_size > 0


def test_convergence_three_rules(tmp_path):
    paths = []
    rng = np.random.default_rng(1)
    for name in ("fixed", "upper", "two_sided"):
        p = tmp_path / f"running_mean_{name}.csv"
        n = np.arange(1, 301)
        mean = 1.0 + rng.normal(0, 0.2, 300) / np.sqrt(n)
        write_running_mean(p, n, mean, mean - 0.1, mean + 0.1)
        paths.append(str(p))
    out = tmp_path / "fig2b.svg"
    code = convergence.main(["--in", *paths, "--out", str(out),
                             "--labels", "fixed", "upper", "two-sided"])
    assert code == 0
    svg = out.read_text()
    for label in ("fixed", "upper", "two-sided"):
        assert label in svg


def test_convergence_empty_csv_refused(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("n,mean,ci_lo,ci_hi\n")
    out = tmp_path / "nope.svg"
    assert convergence.main(["--in", str(p), "--out", str(out)]) == 1
    assert not out.exists()


def test_convergence_schema_mismatch_refused(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    out = tmp_path / "nope.svg"
    assert convergence.main(["--in", str(p), "--out", str(out)]) == 1
    assert not out.exists()


def test_figures_deterministic(tmp_path, flat_csv):
    out1 = tmp_path / "a.svg"
    out2 = tmp_path / "b.svg"
    assert convergence.main(["--in", str(flat_csv), "--out", str(out1)]) == 0
    assert convergence.main(["--in", str(flat_csv), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_infima_exact_bound_coincides(tmp_path):
    xi = np.round(np.arange(0, 3.01, 0.2), 10)
    cdf = np.exp(-xi)
    p = tmp_path / "infima_cdf.csv"
    write_infima(p, xi, cdf, cdf * 0.5, np.zeros_like(xi), np.zeros_like(xi))
    out = tmp_path / "fig.svg"
    assert infima.main(["--in", str(p), "--out", str(out), "--check"]) == 0
    assert out.exists()


def test_infima_violation_detected(tmp_path):
    xi = np.round(np.arange(0, 1.01, 0.2), 10)
    cdf = np.exp(-xi)
    cdf[3] = math.exp(-xi[3]) + 0.05  # above the bound beyond its error bar
    p = tmp_path / "infima_cdf.csv"
    write_infima(p, xi, cdf, cdf * 0.5, np.full_like(xi, 0.01),
                 np.full_like(xi, 0.01))
    out = tmp_path / "fig.svg"
    assert infima.main(["--in", str(p), "--out", str(out), "--check"]) == 3
    assert out.exists()  # figure is still rendered; the check gates the exit


def test_infima_two_times_two_curve_pairs(tmp_path):
    xi = np.round(np.arange(0, 2.01, 0.2), 10)
    mk = lambda scale: (xi, np.exp(-xi) * scale, np.exp(-xi) * scale * 0.8,
                        np.full_like(xi, 1e-3), np.full_like(xi, 1e-3))
    p = tmp_path / "infima_cdf.csv"
    write_infima(p, None, None, None, None, None,
                 gamma_t={10.0: mk(0.5), 100.0: mk(0.7)})
    out = tmp_path / "fig2c.svg"
    assert infima.main(["--in", str(p), "--out", str(out), "--check"]) == 0
    svg = out.read_text()
    assert "10" in svg and "100" in svg


def test_infima_schema_mismatch_refused(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("xi,cdf\n0,1\n")
    out = tmp_path / "nope.svg"
    assert infima.main(["--in", str(p), "--out", str(out)]) == 1
    assert not out.exists()


@pytest.mark.skipif(shutil.which("qmartin") is None,
                    reason="primary CLI not on PATH")
def test_pipeline_integration(tmp_path):
    # regenerate both reference panels from real (small) simulator output
    # through the file interface only
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    subprocess.run(["qmartin", "fig2b", "--n-traj", "400", "--seed", "7",
                    "--out-dir", str(run_dir)], check=True,
                   stdout=subprocess.DEVNULL)
    subprocess.run(["qmartin", "fig2c", "--n-traj", "400", "--seed", "7",
                    "--sample-every", "20", "--out-dir", str(run_dir)],
                   check=True, stdout=subprocess.DEVNULL)
    fig_b = tmp_path / "fig2b.svg"
    code = convergence.main(
        ["--in", *(str(run_dir / f"running_mean_{r}.csv")
                   for r in ("fixed", "upper", "two_sided")),
         "--out", str(fig_b), "--labels", "fixed time", "upper 0.3",
         "two-sided 0.3/-0.4"])
    assert code == 0 and fig_b.exists()
    fig_c = tmp_path / "fig2c.svg"
    code = infima.main(["--in", str(run_dir / "infima_cdf.csv"),
                        "--out", str(fig_c), "--check"])
    assert code == 0 and fig_c.exists()
