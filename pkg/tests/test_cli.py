import csv

import numpy as np
import pytest

from graphstab.cli import main
from graphstab.gnn import load_model
from graphstab.stability import CSV_COLUMNS

FAST = ["--epochs", "3", "--features", "8"]


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    rows = list(csv.DictReader(body))
    return header, body[0].split(","), rows


def spearman(a, b):
    ra = np.argsort(np.argsort(a)).astype(float)
    rb = np.argsort(np.argsort(b)).astype(float)
    return float(np.corrcoef(ra, rb)[0, 1])


def test_sweep_rows_and_schema(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--eps-grid", "1e-3:1:6", "--out", str(out)] + FAST) == 0
    header, columns, rows = read_csv(out)
    assert columns == list(CSV_COLUMNS)
    assert len(rows) == 6
    assert all(float(r["bound_filter"]) >= 0 and float(r["bound_gnn"]) >= 0 for r in rows)
    assert any(l.startswith("# eps-grid=") for l in header)
    assert any(l.startswith("# seed=0") for l in header)
    assert np.allclose([float(r["eps"]) for r in rows], np.logspace(-3, 0, 6))


def test_sweep_multiple_architectures(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--eps-grid", "0.01:0.1:2", "--arch", "linear,gnn", "--model", "dilation", "--out", str(out)] + FAST) == 0
    _, _, rows = read_csv(out)
    assert [r["arch"] for r in rows] == ["linear", "gnn", "linear", "gnn"]
    assert all(float(r["delta"]) == 0.0 for r in rows)


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\neps-grid = 0.01:0.1:3\nseed=4\n")
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(cfg), "--seed", "5", "--out", str(out)] + FAST) == 0
    header, _, rows = read_csv(out)
    assert len(rows) == 3
    assert {r["seed"] for r in rows} == {"5"}


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep", "--model", "bogus"],
        ["sweep", "--eps-grid", "1:0.1:3"],
        ["sweep", "--eps-grid", "abc"],
        ["sweep", "--arch", "mlp"],
        ["train", "--epochs", "-1"],
        ["nosuchcommand"],
        ["sweep", "--no-such-flag", "1"],
    ],
)
def test_invalid_flags_exit_2(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path / "x")] if argv[0] != "nosuchcommand" else argv) == 2


def test_unknown_config_key_exit_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2


def test_train_zero_epochs_persists_initial_model(tmp_path):
    from graphstab.gnn import model_for_arch

    out = tmp_path / "m.txt"
    assert main(["train", "--epochs", "0", "--features", "8", "--seed", "3", "--out", str(out)]) == 0
    model, meta = load_model(out)
    init = model_for_arch("gnn", 8, 5, 3)
    np.testing.assert_array_equal(model.layers[0].taps, init.layers[0].taps)
    np.testing.assert_array_equal(model.readout, init.readout)
    _, columns, rows = read_csv(tmp_path / "m.txt.loss.csv")
    assert columns == ["epoch", "mean_loss"] and rows == []
    assert meta["arch"] == "gnn"


def test_train_deterministic_rerun(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    common = ["train", "--epochs", "3", "--features", "8", "--seed", "2"]
    assert main(common + ["--out", str(a), "--loss-out", str(tmp_path / "loss_a.csv")]) == 0
    assert main(common + ["--out", str(b), "--loss-out", str(tmp_path / "loss_b.csv")]) == 0
    assert a.read_bytes().replace(b"a.txt", b"") == b.read_bytes().replace(b"b.txt", b"")
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("# loss-out") and not l.startswith("# out")]
    assert strip(tmp_path / "loss_a.csv") == strip(tmp_path / "loss_b.csv")


def test_train_rho_reduces_il_constant(tmp_path, capsys):
    values = {}
    for rho in ("0", "5"):
        out = tmp_path / f"m{rho}.txt"
        assert main(["train", "--epochs", "10", "--features", "16", "--rho", rho, "--out", str(out)]) == 0
        values[rho] = float(load_model(out)[1]["il_constant"])
    assert values["5"] < values["0"]


def test_evaluate_report(tmp_path, capsys):
    out = tmp_path / "m.txt"
    assert main(["train", "--arch", "linear", "--out", str(out)] + FAST) == 0
    capsys.readouterr()
    assert main(["evaluate", "--model", str(out), "--split", "test"]) == 0
    line = capsys.readouterr().out.strip()
    arch, split, err, n = line.split(",")
    assert (arch, split) == ("linear", "test")
    assert float(err) >= 0 and int(n) > 0


def test_evaluate_missing_model_exit_2(tmp_path):
    assert main(["evaluate", "--model", str(tmp_path / "missing.txt")]) == 2


def test_estimation_sweep_reference_row(tmp_path):
    out = tmp_path / "est.csv"
    assert main(["estimation-sweep", "--fractions", "0.1,0.5,0.9", "--out", str(out)] + FAST) == 0
    header, columns, rows = read_csv(out)
    assert columns == ["fraction", "measured_gnn_dist", "bound_gnn", "rel_dist"]
    assert any(l.startswith("# fractions=") for l in header)
    ref = rows[-1]
    assert float(ref["fraction"]) == 0.9 and float(ref["measured_gnn_dist"]) == 0.0


def test_estimation_sweep_trend_over_seeds(tmp_path):
    scores = []
    for seed in range(5):
        out = tmp_path / f"est{seed}.csv"
        assert main(["estimation-sweep", "--seed", str(seed), "--data-seed", str(seed), "--out", str(out)] + FAST) == 0
        _, _, rows = read_csv(out)
        f = [float(r["fraction"]) for r in rows]
        d = [float(r["measured_gnn_dist"]) for r in rows]
        scores.append(spearman(f, [-v for v in d]))
    assert np.mean(scores) >= 0.6


def test_demo_dilation_zero_eps(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["demo", "--demo", "dilation", "--eps", "0", "--out", str(out)]) == 0
    _, columns, rows = read_csv(out)
    assert columns == ["series", "index", "lambda", "before", "after"]
    assert rows and all(r["before"] == r["after"] for r in rows)


def test_demo_sharp_filters_drop(tmp_path, capsys):
    assert main(["demo", "--demo", "sharp-filters", "--eps", "0.1", "--out", str(tmp_path / "s.csv")]) == 0
    stats = dict(kv.split("=") for kv in capsys.readouterr().err.split())
    assert float(stats["passband_drop"]) >= 0.9
    assert float(stats["il_dist"]) < float(stats["lipschitz_dist"])


def test_demo_spillage(tmp_path):
    out = tmp_path / "sp.csv"
    assert main(["demo", "--demo", "spillage", "--out", str(out)]) == 0
    _, _, rows = read_csv(out)
    before = np.array([float(r["before"]) for r in rows])
    after = np.array([float(r["after"]) for r in rows])
    assert np.sum(np.abs(before) > 1e-9) == 1
    assert np.sum(np.abs(after) > 1e-9) > 1


def test_il_architecture_more_stable_at_large_eps(tmp_path):
    wins = 0
    for seed in range(3):
        out = tmp_path / f"s{seed}.csv"
        argv = ["sweep", "--eps-grid", "0.1:1:3", "--arch", "gnn,gnn-il", "--seed", str(seed), "--out", str(out)]
        assert main(argv + ["--epochs", "10", "--features", "16"]) == 0
        _, _, rows = read_csv(out)
        by = {(r["eps"], r["arch"]): float(r["measured_gnn_dist"]) for r in rows}
        eps = {r["eps"] for r in rows}
        wins += all(by[(e, "gnn-il")] <= by[(e, "gnn")] for e in eps)
    assert wins >= 2
