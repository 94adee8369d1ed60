import json
import math
import time

import numpy as np
import pytest

from fiddle_ate import ate, benchmark, selftest
from fiddle_ate.cli import main, parse_grid
from fiddle_ate.config import PipelineConfig, from_dict, preset
from fiddle_ate.data import DataError, Dataset, load_csv, write_csv
from fiddle_ate.dgp import DgpSpec, generate


# ---------------------------------------------------------------- csv

def test_two_row_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("y,T,x1,x2\n1.5,1,0.1,0.2\n-2,0,3,4\n")
    ds = load_csv(p)
    assert ds.n == 2 and ds.p == 2
    assert ds.y.tolist() == [1.5, -2.0] and ds.T.tolist() == [1, 0]
    assert ds.X.tolist() == [[0.1, 0.2], [3.0, 4.0]]
    assert ds.pi_star is None


@pytest.mark.parametrize("body, needle", [
    ("y,T,x1\n1,2,0\n", "row 2, column 'T'"),
    ("y,T,x1\n1,1,0\n1,0,abc\n", "row 3, column 'x1'"),
    ("y,T,x1\n1,1,0\n1,0\n", "row 3 has 2 cells"),
    ("y,T,x1\n1,1,nan\n", "non-finite"),
    ("T,y,x1\n1,1,0\n", "header must start"),
    ("y,T,x2\n1,1,0\n", "x1..x1"),
    ("y,T,x1,z\n1,1,0,0\n", "unrecognised"),
    ("", "empty file"),
])
def test_malformed_files(tmp_path, body, needle):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DataError, match=needle):
        load_csv(p)


def test_round_trip(tmp_path):
    syn = generate(DgpSpec(n=60, p=7, seed=3))
    p = tmp_path / "r.csv"
    write_csv(syn.to_dataset(), p)
    back = load_csv(p)
    assert np.array_equal(back.y, syn.y) and np.array_equal(back.T, syn.T)
    assert np.allclose(back.X, syn.X, rtol=0, atol=1e-12)
    assert np.array_equal(back.pi_star, syn.pi_star)
    assert np.array_equal(back.mu1_star, syn.mu1_star)


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.zeros(3), np.array([0, 1, 2]), np.zeros((3, 2)))
    with pytest.raises(DataError):
        Dataset(np.zeros(3), np.array([0, 1, 1]), np.zeros((2, 2)))


# ---------------------------------------------------------------- config

def test_presets_and_dict_round_trip():
    paper = preset("paper")
    assert (paper.width, paper.epochs, paper.reps, paper.depth) == (400, 100, 100, 4)
    desk = preset("desk")
    assert (desk.width, desk.epochs, desk.reps) == (128, 60, 20)
    conf = PipelineConfig(width=9, grid=[(10, 20)])
    assert from_dict(conf.to_dict()) == conf
    assert PipelineConfig(seed=1).digest() == PipelineConfig(seed=2).digest()
    assert PipelineConfig(width=3).digest() != PipelineConfig(width=4).digest()
    with pytest.raises(ValueError):
        from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        PipelineConfig(method="nope")


def test_parse_grid():
    assert parse_grid("n=2000;p=10,500") == [(2000, 10), (2000, 500)]
    with pytest.raises(ValueError):
        parse_grid("n=5")


# ---------------------------------------------------------------- cli

@pytest.fixture
def export(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["export-dgp", "--n", "200", "--p", "20", "--seed", "3", "--out", str(out)]) == 0
    return out


def test_fit_twice_identical(export, tmp_path, capsys):
    args = ["fit", "--data", str(export), "--method", "fiddle", "--seed", "7",
            "--width", "8", "--depth", "2", "--epochs", "2"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == first
    blob = json.loads(first)
    assert set(blob) == {"method", "estimate", "sigma2", "ci", "n", "seed", "config_digest", "meta"}


def test_fit_smoke_reduced_config(export, tmp_path):
    out = tmp_path / "res.json"
    models = tmp_path / "models"
    t0 = time.perf_counter()
    rc = main(["fit", "--data", str(export), "--width", "32", "--epochs", "20", "--out", str(out),
               "--save-models", str(models)])
    assert rc == 0 and time.perf_counter() - t0 < 60
    res = json.loads(out.read_text())
    assert math.isfinite(res["estimate"]) and res["ci"][0] <= res["estimate"] <= res["ci"][1]
    assert sorted(p.name for p in models.iterdir()) == ["mu0.json", "mu1.json", "pi.json"]


def test_oracle_ipw_without_column_errors(tmp_path, capsys):
    out = tmp_path / "noo.csv"
    assert main(["export-dgp", "--n", "50", "--p", "6", "--no-oracle", "--out", str(out)]) == 0
    assert main(["fit", "--data", str(out), "--method", "oracle_ipw"]) == 2
    assert "pi_star" in capsys.readouterr().err


def test_fit_missing_file(tmp_path, capsys):
    assert main(["fit", "--data", str(tmp_path / "none.csv")]) == 2
    assert "error" in capsys.readouterr().err


def test_simulate_writes_tables(tmp_path, capsys):
    stem = tmp_path / "bench"
    rc = main(["simulate", "--method", "oracle_aipw,oracle_ipw", "--reps", "3",
               "--grid", "n=300;p=6,8", "--out", str(stem)])
    assert rc == 0
    rows = json.loads((tmp_path / "bench.json").read_text())
    assert len(rows) == 4 and {r["method"] for r in rows} == {"oracle_aipw", "oracle_ipw"}
    assert (tmp_path / "bench.csv").read_text().startswith("method,n,p,rmse,se,reps,wallclock")
    assert main(["simulate", "--method", "magic", "--grid", "n=300;p=6"]) == 2


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == len(selftest.CHECKS)


def test_selftest_detects_sign_flip(monkeypatch, capsys):
    real = ate.aipw_terms

    def flipped(y, T, mu0, mu1, pi):
        T_, pi_ = np.asarray(T, float), np.asarray(pi, float)
        # augmentation term enters with the wrong sign
        aug = (T_ - pi_) * (np.asarray(mu1) / pi_ + np.asarray(mu0) / (1 - pi_))
        return real(y, T, mu0, mu1, pi) + 2 * aug

    monkeypatch.setattr(ate, "aipw_terms", flipped)
    assert main(["selftest"]) == 1
    captured = capsys.readouterr()
    assert "FAIL doubly_robust_identity" in captured.out
    assert "doubly_robust_identity" in captured.err


# ---------------------------------------------------------------- benchmark

def test_rmse_se():
    rmse, se = benchmark.rmse_se([3.0, -4.0])
    assert rmse == pytest.approx(math.sqrt(12.5))
    assert se == pytest.approx(np.std([9.0, 16.0], ddof=1) / (2 * rmse * math.sqrt(2)))


def test_single_rep_noiseless_oracle_rmse_is_abs_error():
    conf = PipelineConfig(method="oracle_aipw")
    rows, errs = benchmark.run_benchmark(conf, [(200, 6)], ["oracle_aipw"], 1, base_seed=4,
                                         noiseless=True, return_errors=True)
    e = errs[(200, 6, "oracle_aipw")][0]
    assert rows[0].rmse == pytest.approx(abs(e), rel=1e-15)
    assert rows[0].se == 0.0


def test_pooled_replications_match_single_run():
    conf = PipelineConfig(method="oracle_ipw")
    _, whole = benchmark.run_benchmark(conf, [(400, 6)], ["oracle_ipw"], 6, base_seed=2,
                                       return_errors=True)
    _, a = benchmark.run_benchmark(conf, [(400, 6)], ["oracle_ipw"], 3, base_seed=2,
                                   return_errors=True)
    _, b = benchmark.run_benchmark(conf, [(400, 6)], ["oracle_ipw"], 3, base_seed=2, rep_offset=3,
                                   return_errors=True)
    key = (400, 6, "oracle_ipw")
    assert whole[key] == a[key] + b[key]


def test_methods_share_the_replication_dataset():
    from fiddle_ate.numerics import SeededRng, derive_seed

    rep_seed = derive_seed(9, 0)
    spec = DgpSpec(n=300, p=6, seed=derive_seed(rep_seed, benchmark.DATA_STREAM))
    syn = generate(spec, SeededRng(spec.seed))
    e_aipw, _, _ = benchmark.replication(PipelineConfig(method="oracle_aipw"), 300, 6, 0, 9)
    e_ipw, _, _ = benchmark.replication(PipelineConfig(method="oracle_ipw"), 300, 6, 0, 9)
    assert e_aipw == ate.oracle_aipw(syn.y, syn.T, syn.mu0_star, syn.mu1_star, syn.pi_star).estimate
    assert e_ipw == ate.oracle_ipw(syn.y, syn.T, syn.pi_star).estimate
