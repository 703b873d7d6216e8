"""Graph neural networks built from polynomial filter banks.

A layer computes ``X' = sigma(sum_g H^{fg}(S) X[:, g])``. Predictions read
out the final features at one target node through a linear map. Training
covers the single-layer case with hand-derived gradients and ADAM.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import TrainingError, ValidationError
from .filters import FilterBank, apply_bank
from .graph import Permutation, as_gso, gso_matrix, permute_gso, permute_signal
from .spectral import gft, integral_lipschitz_constant

NONLINEARITIES = ("relu", "identity")
ARCHITECTURES = ("linear", "gnn", "gnn-il")

MODEL_FORMAT = "graphstab-model 1"


def relu(v):
    return np.maximum(v, 0.0)


def _activation(name: str):
    if name == "relu":
        return relu
    if name == "identity":
        return lambda v: np.asarray(v, dtype=np.float64)
    raise ValidationError(f"unknown nonlinearity {name!r}; expected one of {NONLINEARITIES}")


@dataclass(frozen=True, eq=False)
class GnnModel:
    """Stack of filter banks followed by a linear readout at the target node."""

    layers: tuple
    nonlinearity: str = "relu"
    readout: np.ndarray = None

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValidationError("model needs at least one layer")
        for i, bank in enumerate(layers):
            if not isinstance(bank, FilterBank):
                raise ValidationError(f"layer {i} is not a FilterBank")
            if i and bank.f_in != layers[i - 1].f_out:
                raise ValidationError(
                    f"layer {i} expects {bank.f_in} input features but layer {i - 1} emits {layers[i - 1].f_out}"
                )
        _activation(self.nonlinearity)
        w = np.ones(layers[-1].f_out) if self.readout is None else np.asarray(self.readout, dtype=np.float64).copy()
        if w.shape != (layers[-1].f_out,):
            raise ValidationError(f"readout needs {layers[-1].f_out} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("readout weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "readout", w)

    @property
    def L(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> tuple:
        return (self.layers[0].f_in,) + tuple(b.f_out for b in self.layers)

    @property
    def K(self) -> int:
        return self.layers[0].K

    def filters(self):
        for bank in self.layers:
            yield from bank.filters()


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 40
    batch_size: int = 5
    il_penalty_weight: float = 0.0
    seed: int = 0
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValidationError("beta1 and beta2 must lie in (0, 1)")
        if self.epochs < 0:
            raise ValidationError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")
        if not self.il_penalty_weight >= 0:
            raise ValidationError("il_penalty_weight must be nonnegative")


def init_model(f_hidden: int, K: int, f_in: int = 1, nonlinearity: str = "relu", seed: int = 0) -> GnnModel:
    """Single-layer model with taps and readout i.i.d. uniform on +-1/sqrt(f_in K)."""
    if f_hidden < 1 or K < 1 or f_in < 1:
        raise ValidationError("f_hidden, K and f_in must be positive")
    rng = np.random.default_rng(seed)
    a = 1.0 / np.sqrt(f_in * K)
    taps = rng.uniform(-a, a, size=(f_hidden, f_in, K))
    readout = rng.uniform(-a, a, size=f_hidden)
    return GnnModel((FilterBank(taps),), nonlinearity, readout)


def model_for_arch(arch: str, f_hidden: int = 64, K: int = 5, seed: int = 0) -> GnnModel:
    """linear uses the identity nonlinearity; gnn and gnn-il use ReLU."""
    if arch not in ARCHITECTURES:
        raise ValidationError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    return init_model(f_hidden, K, nonlinearity="identity" if arch == "linear" else "relu", seed=seed)


def layer_forward(bank: FilterBank, S, X, nonlinearity: str = "relu") -> np.ndarray:
    return _activation(nonlinearity)(apply_bank(bank, S, X))


def hidden_output(model: GnnModel, S, x) -> np.ndarray:
    """Phi(S, x): the N x F_L feature matrix after the last layer."""
    A = gso_matrix(S)
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != A.shape[0]:
        raise ValidationError(f"signal of length {X.shape[0]} does not fit a {A.shape[0]}-node graph")
    for bank in model.layers:
        X = layer_forward(bank, A, X, model.nonlinearity)
    return X


def forward(model: GnnModel, S, x, target: int):
    """Returns ``(prediction, Phi)`` with prediction = readout . Phi[target]."""
    n = gso_matrix(S).shape[0]
    if not 0 <= int(target) < n:
        raise ValidationError(f"target node {target} out of range for {n} nodes")
    Phi = hidden_output(model, S, x)
    return float(Phi[int(target)] @ model.readout), Phi


def equivariance_check(model: GnnModel, S, x, P: Permutation) -> float:
    """||P^T Phi(S, x) - Phi(P^T S P, P^T x)|| / max(1, ||Phi(S, x)||)."""
    S = as_gso(S)
    Phi = hidden_output(model, S, x)
    Phi_hat = hidden_output(model, permute_gso(S, P), permute_signal(x, P))
    return float(np.linalg.norm(permute_signal(Phi, P) - Phi_hat) / max(1.0, np.linalg.norm(Phi)))


def smooth_l1(pred, target):
    r = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    a = np.abs(r)
    out = np.where(a < 1.0, 0.5 * r * r, a - 0.5)
    return out if out.ndim else float(out)


def _smooth_l1_grad(r):
    return np.where(np.abs(r) < 1.0, r, np.sign(r))


def _il_design(eigenvalues, K: int) -> np.ndarray:
    """D[i, k] = k lam_i^k so that (D @ taps)[i] = lam_i h'(lam_i)."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    return np.arange(K) * lam[:, None] ** np.arange(K)


def il_penalty(model: GnnModel, eigenvalues, rho: float) -> float:
    """rho * sum over filters of max_i (lam_i h'(lam_i))^2."""
    if rho < 0:
        raise ValidationError("penalty weight must be nonnegative")
    if rho == 0:
        return 0.0
    total = 0.0
    for bank in model.layers:
        q = np.einsum("ik,fgk->fgi", _il_design(eigenvalues, bank.K), bank.taps)
        total += float(np.sum(np.max(q * q, axis=-1)))
    return rho * total


def _il_penalty_grad(taps: np.ndarray, D: np.ndarray, rho: float):
    q = np.einsum("ik,fgk->fgi", D, taps)
    q2 = q * q
    # argmax returns the lowest index at ties
    star = np.argmax(q2, axis=-1)
    q_star = np.take_along_axis(q, star[..., None], axis=-1)[..., 0]
    value = rho * float(np.sum(q_star**2))
    grad = 2.0 * rho * q_star[..., None] * D[star]
    return value, grad


def max_il_constant(model: GnnModel, interval) -> float:
    """Largest integral-Lipschitz constant over every filter of the model."""
    return max(integral_lipschitz_constant(h, interval) for h in model.filters())


def target_features(S, signals, target: int, K: int) -> np.ndarray:
    """A[s, k, g] = (S^k X_s)[target, g] for every sample s."""
    A = gso_matrix(S)
    n = A.shape[0]
    if not 0 <= int(target) < n:
        raise ValidationError(f"target node {target} out of range for {n} nodes")
    X = np.asarray(signals, dtype=np.float64)
    if X.ndim == 2:
        X = X[..., None]
    if X.ndim != 3 or X.shape[1] != n:
        raise ValidationError(f"signals of shape {np.shape(signals)} do not fit a {n}-node graph")
    rows = np.empty((K, n))
    rows[0] = 0.0
    rows[0, int(target)] = 1.0
    for k in range(1, K):
        rows[k] = rows[k - 1] @ A
    return np.einsum("kn,sng->skg", rows, X)


def loss_and_grad(taps, readout, features, labels, nonlinearity="relu", D=None, rho=0.0):
    """Mean smooth-L1 loss plus IL penalty, with gradients for taps and readout.

    ``features`` comes from ``target_features``; ``D`` from the training
    GSO's eigenvalues (needed only when ``rho > 0``).
    """
    taps = np.asarray(taps, dtype=np.float64)
    w = np.asarray(readout, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n = y.size
    Z = np.einsum("fgk,skg->sf", taps, features)
    if nonlinearity == "relu":
        act = relu(Z)
        dact = (Z > 0).astype(np.float64)
    else:
        act = Z
        dact = np.ones_like(Z)
    r = act @ w - y
    loss = float(np.mean(smooth_l1(r, 0.0)))
    g = _smooth_l1_grad(r) / n
    grad_w = g @ act
    dZ = (g[:, None] * w) * dact
    grad_taps = np.einsum("sf,skg->fgk", dZ, features)
    if rho > 0:
        pen, pen_grad = _il_penalty_grad(taps, D, rho)
        loss += pen
        grad_taps = grad_taps + pen_grad
    return loss, grad_taps, grad_w


def _split_arrays(dataset, split):
    signals = np.asarray(dataset.signals, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.float64)
    if split is not None:
        tags = np.asarray(dataset.splits)
        keep = tags == split
        signals, labels = signals[keep], labels[keep]
    return signals, labels


def train(model: GnnModel, S, dataset, config: TrainConfig = TrainConfig(), split: str | None = "train"):
    """Fit a single-layer model. Returns ``(trained_model, per_epoch_mean_loss)``.

    ``dataset`` needs ``signals``, ``labels``, ``target_item`` and, unless
    ``split`` is None, per-sample ``splits`` tags.
    """
    if model.L != 1:
        raise ValidationError("training supports single-layer models only")
    S = as_gso(S)
    signals, labels = _split_arrays(dataset, split)
    if labels.size == 0:
        raise ValidationError("no training samples")
    bank = model.layers[0]
    features = target_features(S, signals, dataset.target_item, bank.K)
    rho = float(config.il_penalty_weight)
    D = _il_design(S.eigenvalues, bank.K) if rho > 0 else None

    taps = bank.taps.copy()
    w = model.readout.copy()
    m_t, v_t = np.zeros_like(taps), np.zeros_like(taps)
    m_w, v_w = np.zeros_like(w), np.zeros_like(w)
    b1, b2, lr, eps = config.beta1, config.beta2, config.learning_rate, config.adam_eps
    rng = np.random.default_rng(config.seed)
    n = labels.size
    trace = []
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            loss, g_t, g_w = loss_and_grad(taps, w, features[idx], labels[idx], model.nonlinearity, D, rho)
            if not (np.isfinite(loss) and np.all(np.isfinite(g_t)) and np.all(np.isfinite(g_w))):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {b}",
                    {
                        "epoch": epoch,
                        "batch": b,
                        "loss": loss,
                        "taps_norm": float(np.linalg.norm(taps)),
                        "readout_norm": float(np.linalg.norm(w)),
                    },
                )
            losses.append(loss)
            step += 1
            c1, c2 = 1.0 - b1**step, 1.0 - b2**step
            m_t = b1 * m_t + (1 - b1) * g_t
            v_t = b2 * v_t + (1 - b2) * g_t * g_t
            taps = taps - lr * (m_t / c1) / (np.sqrt(v_t / c2) + eps)
            m_w = b1 * m_w + (1 - b1) * g_w
            v_w = b2 * v_w + (1 - b2) * g_w * g_w
            w = w - lr * (m_w / c1) / (np.sqrt(v_w / c2) + eps)
        trace.append(float(np.mean(losses)))
    return replace(model, layers=(FilterBank(taps),), readout=w), trace


def predict(model: GnnModel, S, signals, target: int) -> np.ndarray:
    """Predictions for a batch of signals (rows)."""
    X = np.asarray(signals, dtype=np.float64)
    return np.array([forward(model, S, x, target)[0] for x in X])


def rmse(model: GnnModel, S, dataset, split: str | None = "test") -> float:
    signals, labels = _split_arrays(dataset, split)
    if labels.size == 0:
        raise ValidationError(f"split {split!r} has no samples")
    pred = predict(model, S, signals, dataset.target_item)
    return float(np.sqrt(np.mean((pred - labels) ** 2)))


def spillage_spectrum(sigma: str, V, x) -> np.ndarray:
    """GFT of sigma(x): shows how a pointwise nonlinearity spreads frequency content."""
    return gft(V, _activation(sigma)(np.asarray(x, dtype=np.float64)))


def _fmt(values) -> str:
    return " ".join("%.17g" % v for v in np.ravel(values))


def save_model(model: GnnModel, path, meta: dict | None = None):
    """Plain-text model file; floats use 17 significant digits so reloads are exact."""
    lines = [MODEL_FORMAT, f"nonlinearity {model.nonlinearity}", "widths " + " ".join(map(str, model.widths))]
    lines.append(f"taps {model.K}")
    for key, value in (meta or {}).items():
        if any(c.isspace() for c in str(key) + str(value)):
            raise ValidationError(f"meta entry {key}={value!r} must not contain whitespace")
        lines.append(f"meta {key} {value}")
    for i, bank in enumerate(model.layers):
        lines.append(f"layer {i} {_fmt(bank.taps)}")
    lines.append(f"readout {_fmt(model.readout)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    """Inverse of ``save_model``. Returns ``(model, meta)``."""
    try:
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise ValidationError(f"cannot read model file {path}: {exc}") from exc
    if not lines or lines[0] != MODEL_FORMAT:
        raise ValidationError(f"{path}: not a model file")
    fields, meta, layers = {}, {}, {}
    try:
        for ln in lines[1:]:
            if not ln.strip():
                continue
            key, _, rest = ln.partition(" ")
            if key == "meta":
                k, _, v = rest.partition(" ")
                meta[k] = v
            elif key == "layer":
                i, _, nums = rest.partition(" ")
                layers[int(i)] = np.array(nums.split(), dtype=np.float64)
            else:
                fields[key] = rest
        widths = [int(v) for v in fields["widths"].split()]
        K = int(fields["taps"])
        banks = []
        for i in range(len(widths) - 1):
            banks.append(FilterBank(layers[i].reshape(widths[i + 1], widths[i], K)))
        readout = np.array(fields["readout"].split(), dtype=np.float64)
        model = GnnModel(tuple(banks), fields["nonlinearity"], readout)
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed model file ({exc})") from exc
    return model, meta
