"""Command-line entry point: ``graphstab <command> [flags]``.

Every command accepts ``--config FILE`` with ``key=value`` lines whose keys
are the long flag names. Explicit flags win over the file, which wins over
the built-in defaults. CSV outputs start with the resolved configuration as
``#`` comment lines.

Exit codes: 0 success, 2 usage or validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import experiments as ex
from .data import DEFAULT_K, parse_movielens, synthetic_ratings
from .exceptions import ValidationError
from .graph import GraphShiftOperator
from .gnn import ARCHITECTURES, load_model, max_il_constant, rmse, save_model, spillage_spectrum
from .stability import CSV_COLUMNS, SWEEP_MODELS, sweep

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(ValidationError):
    pass


# --- value parsers -------------------------------------------------------


def _int(s):
    return int(s)


def _float(s):
    v = float(s)
    if not np.isfinite(v):
        raise ValueError(f"{s!r} is not finite")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise ValueError("must be nonnegative")
    return v


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


def _eps_grid(s):
    """``lo:hi:points`` -> log-spaced grid; a single number -> [number]."""
    parts = s.split(":")
    if len(parts) == 1:
        v = _float(parts[0])
        if v < 0:
            raise ValueError("eps must be nonnegative")
        return [v]
    if len(parts) != 3:
        raise ValueError("expected lo:hi:points")
    lo, hi, pts = _float(parts[0]), _float(parts[1]), int(parts[2])
    if not (0 < lo <= hi) or pts < 1:
        raise ValueError("need 0 < lo <= hi and points >= 1")
    if pts == 1:
        return [lo]
    return [float(v) for v in np.logspace(np.log10(lo), np.log10(hi), pts)]


def _fractions(s):
    vals = [_float(v) for v in s.split(",") if v.strip()]
    if not vals or any(not 0 < v <= 1 for v in vals):
        raise ValueError("fractions must be a comma list of values in (0, 1]")
    return vals


def _archs(s):
    vals = [v.strip() for v in s.split(",") if v.strip()]
    if not vals or any(v not in ARCHITECTURES for v in vals):
        raise ValueError(f"expected a comma list drawn from {', '.join(ARCHITECTURES)}")
    return vals


def _target(s):
    if s == "auto-most-rated":
        return s
    v = int(s)
    if v < 1:
        raise ValueError("item ids are 1-based")
    return v


def _optional_float(s):
    return None if s in ("", "default") else _float(s)


# --- option tables ---------------------------------------------------------

DATA_OPTIONS = [
    ("data", str, "synthetic", "rating source: 'synthetic' or a u.data-format file"),
    ("target", _target, "auto-most-rated", "target item (1-based id) or auto-most-rated"),
    ("n-users", _int, 200, "synthetic users"),
    ("n-items", _int, 100, "synthetic items (graph nodes)"),
    ("rank", _int, 5, "synthetic latent rank"),
    ("noise-sd", _float, 0.5, "synthetic noise standard deviation"),
    ("density", _float, 0.3, "synthetic fraction of observed ratings"),
    ("data-seed", _int, 0, "synthetic generator seed"),
    ("split-seed", _int, 0, "train/val/test shuffle seed"),
    ("k", _int, DEFAULT_K, "neighbors per node in the kNN graph"),
]

TRAIN_OPTIONS = [
    ("epochs", _nonneg_int, 40, "training epochs"),
    ("lr", _float, 0.005, "ADAM learning rate"),
    ("rho", _optional_float, None, "IL penalty weight (default: 0, or 1 for gnn-il)"),
    ("features", _int, 64, "hidden features"),
    ("taps", _int, 5, "filter taps K"),
]

COMMANDS = {
    "sweep": [
        ("graph", str, "synthetic", "rating source used to build the graph: 'synthetic' or a u.data file"),
        ("model", _choice(*SWEEP_MODELS), "relative", "perturbation model"),
        ("eps-grid", _eps_grid, "1e-3:1:6", "lo:hi:points, log-spaced"),
        ("arch", _archs, "gnn", "architecture or comma list"),
        ("seed", _int, 0, "seed for initialization, training and perturbations"),
        ("out", str, "-", "output CSV path ('-' for stdout)"),
    ]
    + [o for o in DATA_OPTIONS if o[0] != "data"]
    + TRAIN_OPTIONS,
    "train": [
        ("arch", _choice(*ARCHITECTURES), "gnn", "architecture"),
        ("seed", _int, 0, "seed for initialization and batch order"),
        ("out", str, "model.txt", "model output path"),
        ("loss-out", str, "", "loss CSV path (default: <out>.loss.csv)"),
    ]
    + DATA_OPTIONS
    + TRAIN_OPTIONS,
    "evaluate": [
        ("model", str, "model.txt", "trained model file"),
        ("graph", str, "auto", "'auto' rebuilds the training graph from --data"),
        ("split", _choice("test", "val", "train"), "test", "split to score"),
    ]
    + DATA_OPTIONS,
    "estimation-sweep": [
        ("fractions", _fractions, ",".join(map(str, ex.DEFAULT_FRACTIONS)), "comma list of user fractions"),
        ("arch", _choice(*ARCHITECTURES), "gnn", "architecture"),
        ("seed", _int, 0, "seed for initialization, training and user order"),
        ("out", str, "-", "output CSV path ('-' for stdout)"),
    ]
    + DATA_OPTIONS
    + TRAIN_OPTIONS,
    "demo": [
        ("demo", _choice("dilation", "sharp-filters", "spillage"), "dilation", "which demonstration"),
        ("n", _int, 30, "graph size"),
        ("eps", _float, 0.1, "dilation factor"),
        ("seed", _int, 0, "graph seed"),
        ("out", str, "-", "output CSV path ('-' for stdout)"),
    ],
}


def _build_parser():
    parser = argparse.ArgumentParser(prog="graphstab", description="Stability experiments for graph filters and GNNs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, options in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key=value file with defaults for the flags below")
        for key, _, default, help_text in options:
            p.add_argument(f"--{key}", dest=key, default=None, help=f"{help_text} (default: {default})")
    return parser


def _read_config(path, known):
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("_", "-")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def resolve(command, args) -> dict:
    """Merge defaults, config file and flags; returns raw strings and parsed values."""
    options = COMMANDS[command]
    known = {o[0] for o in options}
    from_file = _read_config(args.config, known) if args.config else {}
    resolved = {}
    for key, parse, default, _ in options:
        flag = getattr(args, key)
        raw = flag if flag is not None else from_file.get(key)
        if raw is None:
            resolved[key] = default if not isinstance(default, str) or parse is str else parse(default)
            continue
        try:
            resolved[key] = parse(raw)
        except ValueError as exc:
            raise UsageError(f"invalid value {raw!r} for --{key}: {exc}") from None
    return resolved


def _config_header(command, config) -> list:
    lines = [f"# graphstab {command}"]
    for key, value in config.items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value) if key != "eps-grid" else ",".join("%.17g" % v for v in value)
        lines.append(f"# {key}={'' if value is None else value}")
    return lines


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = sys.stdout if self.path == "-" else open(self.path, "w", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()
        else:
            self.fh.flush()


def _write_csv(path, command, config, columns, rows):
    with _Output(path) as fh:
        for line in _config_header(command, config):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return v


def _ratings(config):
    if config["data"] == "synthetic":
        return synthetic_ratings(
            config["n-users"], config["n-items"], config["rank"], config["noise-sd"], config["density"], config["data-seed"]
        )
    return parse_movielens(config["data"])


def _pipeline(config):
    ratings = _ratings(config)
    target = None if config["target"] == "auto-most-rated" else config["target"] - 1
    return ex.prepare(ratings, target, config["split-seed"], config["k"])


def _train(pipe, config, arch):
    return ex.train_arch(
        pipe,
        arch,
        seed=config["seed"],
        epochs=config["epochs"],
        rho=config["rho"],
        lr=config["lr"],
        f_hidden=config["features"],
        K=config["taps"],
    )


def cmd_sweep(config):
    data_config = dict(config, data=config["graph"])
    pipe = _pipeline(data_config)
    models = {arch: _train(pipe, config, arch)[0] for arch in config["arch"]}
    rows = sweep(pipe.S, config["model"], config["eps-grid"], models, config["seed"], pipe.test_signals())
    _write_csv(config["out"], "sweep", config, CSV_COLUMNS, [r.csv_row() for r in rows])


def cmd_train(config):
    pipe = _pipeline(config)
    model, trace = _train(pipe, config, config["arch"])
    lam = pipe.S.eigenvalues
    il = max_il_constant(model, (lam[0], lam[-1]))
    meta = {
        "arch": config["arch"],
        "target": pipe.dataset.target_item + 1,
        "rho": ex.arch_rho(config["arch"], config["rho"]),
        "il_constant": "%.17g" % il,
    }
    save_model(model, config["out"], meta)
    loss_out = config["loss-out"] or config["out"] + ".loss.csv"
    _write_csv(loss_out, "train", config, ("epoch", "mean_loss"), [{"epoch": i + 1, "mean_loss": v} for i, v in enumerate(trace)])
    print(f"il_constant={il:.6g} final_loss={trace[-1] if trace else float('nan'):.6g}")


def cmd_evaluate(config):
    model, meta = load_model(config["model"])
    if config["target"] == "auto-most-rated" and "target" in meta:
        config = dict(config, target=int(meta["target"]))
    pipe = _pipeline(config)
    S = pipe.S
    if config["graph"] != "auto":
        try:
            A = np.loadtxt(config["graph"], ndmin=2)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read graph {config['graph']}: {exc}") from exc
        S = GraphShiftOperator(A)
    split = config["split"]
    n = pipe.dataset.count(split)
    err = rmse(model, S, pipe.dataset, split)
    print(f"{meta.get('arch', 'unknown')},{split},{err:.6f},{n}")


def cmd_estimation_sweep(config):
    pipe = _pipeline(config)
    model, _ = _train(pipe, config, config["arch"])
    rows = ex.estimation_sweep(pipe, model, config["fractions"], config["seed"], config["k"])
    columns = ("fraction", "measured_gnn_dist", "bound_gnn", "rel_dist")
    _write_csv(config["out"], "estimation-sweep", config, columns, [r.__dict__ for r in rows])


def cmd_demo(config):
    S = ex.demo_graph(config["n"], config["seed"])
    lam, V = S.eigenvalues, S.eigenvectors
    eps = config["eps"]
    if eps <= -1:
        raise UsageError("--eps must exceed -1")
    rows = []
    if config["demo"] == "spillage":
        x = V[:, -1]
        before = spillage_spectrum("identity", V, x)
        after = spillage_spectrum("relu", V, x)
        rows = [
            {"series": "relu", "index": i, "lambda": lam[i], "before": before[i], "after": after[i]}
            for i in range(lam.size)
        ]
    else:
        if config["demo"] == "dilation":
            responses = {
                "eigenvalue": lambda v: np.asarray(v, dtype=np.float64),
                "response": ex.polynomial_response(DILATION_DEMO_TAPS),
            }
        else:
            responses = ex.sharp_filter_pair(lam)
        for name, h in responses.items():
            before, after = ex.dilation_responses(h, lam, eps)
            rows += [
                {"series": name, "index": i, "lambda": lam[i], "before": before[i], "after": after[i]}
                for i in range(lam.size)
            ]
        if config["demo"] == "sharp-filters":
            h = responses["lipschitz"]
            top = float(h(lam[-1]))
            drop = (top - float(h((1 + eps) * lam[-1]))) / top
            print(
                f"passband_drop={drop:.6f} "
                f"lipschitz_dist={ex.dilation_distance(h, lam, eps):.6g} "
                f"il_dist={ex.dilation_distance(responses['integral-lipschitz'], lam, eps):.6g}",
                file=sys.stderr,
            )
    _write_csv(config["out"], "demo", config, ("series", "index", "lambda", "before", "after"), rows)


# smooth low-pass polynomial used to visualize how dilation moves the response
DILATION_DEMO_TAPS = (1.0, -0.8, 0.3, -0.05)

HANDLERS = {
    "sweep": cmd_sweep,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "estimation-sweep": cmd_estimation_sweep,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        config = resolve(args.command, args)
        HANDLERS[args.command](config)
    except ValidationError as exc:
        print(f"graphstab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, OSError, ArithmeticError) as exc:
        print(f"graphstab: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
