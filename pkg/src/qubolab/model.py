"""Reaction-diffusion graph network for predicting QUBO minimizers.

The network embeds the observed vector b into d channels, then runs L
forward-Euler steps that alternate graph diffusion and a learned
pointwise reaction.  Each step can inject a problem-aware feature built
from the relaxed residual h * (A h + b), which carries the objective
structure into the layer.  A linear decoder maps the final features to
one logit per node.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import (AdamState, SparseMatrix, Tape, Tensor, adam_step,
                       backward, bce_with_logits, zero_grad)
from .datagen import Dataset
from .qubo import QuboInstance, as_observed_vector

# Raw value whose softplus is exactly 1, so diffusion starts at unit rate.
_SIGMA_RAW_INIT = math.log(math.expm1(1.0))


@dataclass
class BpgnnConfig:
    """Architecture knobs: width d, depth layers, Euler step eps_step,
    dropout rate, and the residual-feature switch."""

    d: int = 32
    layers: int = 4
    eps_step: float = 0.5
    dropout: float = 0.0
    use_qubo_features: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if self.eps_step <= 0:
            raise ValueError(f"eps_step must be positive, got {self.eps_step}")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")


def build_laplacian(instance: QuboInstance) -> sp.csr_matrix:
    """Symmetric normalized Laplacian of the instance connectivity.

    L = I - D^{-1/2} Abar D^{-1/2} with Abar the unweighted symmetrized
    0/1 off-diagonal sparsity pattern.  Isolated nodes keep L_ii = 1.
    Eigenvalues lie in [0, 2], so an Euler step with eps_step <= 1 and
    unit diffusion rate is non-expansive.
    """
    gv = instance.graph_view
    k = instance.k
    dinv = 1.0 / np.sqrt(np.maximum(gv.degrees.astype(np.float64), 1.0))
    diag_r = np.arange(k, dtype=np.int64)
    if gv.num_edges:
        i, j = gv.edges[:, 0], gv.edges[:, 1]
        w = dinv[i] * dinv[j]
        rows = np.concatenate([i, j, diag_r])
        cols = np.concatenate([j, i, diag_r])
        vals = np.concatenate([-w, -w, np.ones(k)])
    else:
        rows = cols = diag_r
        vals = np.ones(k)
    lap = sp.csr_matrix((vals, (rows, cols)), shape=(k, k))
    lap.sort_indices()
    return lap


class BpgnnModel:
    """Network bound to one instance (its A and Laplacian are cached).

    Parameters live in a flat name -> Tensor dict:
      enc.*                encoder MLP 1 -> d (relu hidden)
      layer{i}.g.*         residual-feature MLP d -> d (relu hidden, linear out)
      layer{i}.f.*         reaction MLP d -> d (relu hidden, tanh out)
      layer{i}.sigma_raw   per-channel diffusion rates, softplus-reparameterized
      dec.*                linear decoder d -> 1
    """

    def __init__(self, config: BpgnnConfig, instance: QuboInstance):
        self.config = config
        self.instance = instance
        self.laplacian = build_laplacian(instance)
        self._graph_cache: dict[int, tuple[SparseMatrix, SparseMatrix]] = {}
        self.params = self._init_params()

    def _init_params(self) -> dict[str, Tensor]:
        d = self.config.d
        rng = np.random.default_rng(self.config.seed)

        def weight(fan_in: int, shape) -> Tensor:
            bound = 1.0 / math.sqrt(fan_in)
            return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

        def bias(width: int) -> Tensor:
            return Tensor(np.zeros((1, width)), requires_grad=True)

        params: dict[str, Tensor] = {
            "enc.w1": weight(1, (1, d)),
            "enc.b1": bias(d),
            "enc.w2": weight(d, (d, d)),
            "enc.b2": bias(d),
        }
        for layer in range(self.config.layers):
            for name in (f"layer{layer}.g", f"layer{layer}.f"):
                params[f"{name}.w1"] = weight(d, (d, d))
                params[f"{name}.b1"] = bias(d)
                params[f"{name}.w2"] = weight(d, (d, d))
                params[f"{name}.b2"] = bias(d)
            params[f"layer{layer}.sigma_raw"] = Tensor(
                np.full((1, d), _SIGMA_RAW_INIT), requires_grad=True
            )
        params["dec.w"] = weight(d, (d, 1))
        params["dec.b"] = bias(1)
        return params

    # -- forward --------------------------------------------------------

    def _blocks(self, batch: int) -> tuple[SparseMatrix, SparseMatrix]:
        """Block-diagonal A and Laplacian for a batch of stacked copies."""
        cached = self._graph_cache.get(batch)
        if cached is None:
            if batch == 1:
                a, lap = self.instance.a_csr, self.laplacian
            else:
                a = sp.block_diag([self.instance.a_csr] * batch, format="csr")
                lap = sp.block_diag([self.laplacian] * batch, format="csr")
            cached = (SparseMatrix(a), SparseMatrix(lap))
            self._graph_cache[batch] = cached
        return cached

    def _mlp(self, x: Tensor, prefix: str, out_tanh: bool) -> Tensor:
        p = self.params
        hidden = ad.relu(ad.broadcast_add_row(ad.matmul(x, p[f"{prefix}.w1"]),
                                              p[f"{prefix}.b1"]))
        out = ad.broadcast_add_row(ad.matmul(hidden, p[f"{prefix}.w2"]),
                                   p[f"{prefix}.b2"])
        return ad.tanh(out) if out_tanh else out

    def _forward_stacked(self, a_sp: SparseMatrix, l_sp: SparseMatrix,
                         b_col: np.ndarray, training: bool, dropout_p: float,
                         rng: np.random.Generator | None) -> Tensor:
        cfg = self.config
        p = self.params

        def drop(t: Tensor) -> Tensor:
            if training and dropout_p > 0:
                seed = int(rng.integers(0, 2 ** 63))
                return ad.dropout(t, dropout_p, True, seed)
            return t

        b_t = Tensor(b_col)
        h = drop(self._mlp(b_t, "enc", out_tanh=False))
        for layer in range(cfg.layers):
            if cfg.use_qubo_features:
                r = ad.hadamard(h, ad.broadcast_add_col(ad.spmm(a_sp, h), b_t))
                u = ad.add(h, self._mlp(r, f"layer{layer}.g", out_tanh=False))
            else:
                u = h
            sig = ad.softplus(p[f"layer{layer}.sigma_raw"])
            diffused = ad.scale_columns(ad.spmm(l_sp, u), sig)
            h_half = ad.add(h, ad.scale(diffused, -cfg.eps_step))
            reaction = self._mlp(h_half, f"layer{layer}.f", out_tanh=True)
            h = drop(ad.add(h_half, ad.scale(reaction, cfg.eps_step)))
        return ad.broadcast_add_row(ad.matmul(h, p["dec.w"]), p["dec.b"])

    def forward(self, b, training: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        """Logits, shape (k, 1), for one observed vector."""
        b = as_observed_vector(b, self.instance.k)
        a_sp, l_sp = self._blocks(1)
        dropout_p = self.config.dropout if training else 0.0
        if training and dropout_p > 0 and rng is None:
            raise ValueError("training-mode forward with dropout needs an rng")
        return self._forward_stacked(a_sp, l_sp, b.reshape(-1, 1), training,
                                     dropout_p, rng)

    def predict(self, b, threshold: float = 0.5) -> np.ndarray:
        """Binary assignment: bit i is 1 iff sigmoid(logit_i) > threshold."""
        logits = self.forward(b).data.ravel()
        probs = ad._sigmoid(logits)
        return (probs > threshold).astype(np.int8)


def forward(model: BpgnnModel, instance: QuboInstance, b) -> Tensor:
    """Module-level forward that checks the instance is the model's own."""
    own = model.instance
    if instance is not own:
        same = (
            instance.k == own.k
            and np.array_equal(instance.rows, own.rows)
            and np.array_equal(instance.cols, own.cols)
            and np.array_equal(instance.vals, own.vals)
        )
        if not same:
            raise ValueError("instance does not match the one the model was built for")
    return model.forward(b)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    """Optimization knobs.

    The intended search grids are lr in {1e-5, 1e-4, 1e-3}, weight_decay
    in {1e-5, 1e-4, 0} and dropout in {0, 0.1, 0.5}, with at most 200
    epochs; values outside the grids are accepted (lr=0 is useful for
    no-op training checks).  dropout None falls back to the model's own
    rate.  When both targets are set, training stops once the validation
    accuracy and relative objective both meet them.
    """

    lr: float = 1e-3
    weight_decay: float = 0.0
    dropout: float | None = None
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    target_val_acc: float | None = None
    target_val_relqubo: float | None = None

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.dropout is not None and not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def train(model: BpgnnModel, dataset: Dataset, config: TrainConfig,
          history_path: str | os.PathLike | None = None):
    """Mini-batch Adam on the training split.

    Batches stack examples that share A, so one tape drives the whole
    batch through block-diagonal graph operators.  Returns the model with
    the parameters that achieved the best validation BCE, plus a
    per-epoch history of train/val BCE, val accuracy and val relative
    QUBO objective.
    """
    inst = model.instance
    if dataset.k != inst.k:
        raise ValueError(f"dataset k={dataset.k} does not match instance k={inst.k}")
    train_idx = dataset.indices("train")
    if not train_idx:
        raise ValueError("empty training split")
    val_idx = dataset.indices("val")

    rng = np.random.default_rng(config.seed)
    dropout_p = config.dropout if config.dropout is not None else model.config.dropout

    b_train = dataset.b_matrix("train")
    y_train = dataset.x_matrix("train").astype(np.float64)
    n_train = len(train_idx)
    if val_idx:
        b_val = dataset.b_matrix("val")
        y_val = dataset.x_matrix("val")
        f_ref = np.array([
            inst.evaluate(dataset.pairs[i].b, dataset.pairs[i].x) for i in val_idx
        ])

    state = AdamState(lr=config.lr, weight_decay=config.weight_decay)
    best_bce = np.inf
    best_params: dict[str, np.ndarray] | None = None
    history: list[dict] = []

    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n_train)
        total = 0.0
        for lo in range(0, n_train, config.batch_size):
            rows = perm[lo:lo + config.batch_size]
            b_col = b_train[rows].reshape(-1, 1)
            y_col = y_train[rows].reshape(-1, 1)
            a_sp, l_sp = model._blocks(len(rows))
            with Tape():
                logits = model._forward_stacked(a_sp, l_sp, b_col, True,
                                                dropout_p, rng)
                loss = bce_with_logits(logits, y_col)
                backward(loss)
            grads = {name: t.grad for name, t in model.params.items()}
            adam_step(model.params, grads, state)
            zero_grad(model.params)
            total += float(loss.data) * len(rows)
        record = {"epoch": epoch, "train_bce": total / n_train,
                  "val_bce": math.nan, "val_acc": math.nan,
                  "val_relqubo": math.nan}

        if val_idx:
            val_bce, val_acc, val_rel = _validate(model, b_val, y_val, f_ref)
            record.update(val_bce=val_bce, val_acc=val_acc, val_relqubo=val_rel)
            if val_bce < best_bce:
                best_bce = val_bce
                best_params = {n: t.data.copy() for n, t in model.params.items()}
        history.append(record)

        if (
            val_idx
            and config.target_val_acc is not None
            and config.target_val_relqubo is not None
            and record["val_acc"] >= config.target_val_acc
            and record["val_relqubo"] <= config.target_val_relqubo
        ):
            break

    if best_params is not None:
        for name, data in best_params.items():
            model.params[name].data = data
    if history_path is not None:
        write_history(history, history_path)
    return model, history


def _validate(model: BpgnnModel, b_val: np.ndarray, y_val: np.ndarray,
              f_ref: np.ndarray) -> tuple[float, float, float]:
    n_val, k = b_val.shape
    a_sp, l_sp = model._blocks(n_val)
    logits = model._forward_stacked(a_sp, l_sp, b_val.reshape(-1, 1), False,
                                    0.0, None)
    loss = bce_with_logits(logits, y_val.reshape(-1, 1).astype(np.float64))
    preds = (ad._sigmoid(logits.data) > 0.5).astype(np.int8).reshape(n_val, k)
    acc = float(np.mean(preds == y_val))
    # The relative gap is undefined when the reference objective is ~0
    # (e.g. an all-zeros optimum); those pairs are left out of the mean.
    rels = []
    for i in range(n_val):
        if abs(f_ref[i]) <= 1e-12:
            continue
        f_p = model.instance.evaluate(b_val[i], preds[i])
        rels.append((f_p - f_ref[i]) / abs(f_ref[i]))
    rel = float(np.mean(rels)) if rels else math.nan
    return float(loss.data), acc, rel


HISTORY_COLUMNS = ("epoch", "train_bce", "val_bce", "val_acc", "val_relqubo")


def write_history(history: list[dict], path: str | os.PathLike) -> None:
    with open(os.fspath(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for rec in history:
            writer.writerow([rec["epoch"]] + [repr(float(rec[c]))
                                              for c in HISTORY_COLUMNS[1:]])


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(model: BpgnnModel, path: str | os.PathLike) -> None:
    doc = {
        "config": asdict(model.config),
        "params": {
            name: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
            for name, t in model.params.items()
        },
    }
    with open(os.fspath(path), "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path: str | os.PathLike, instance: QuboInstance) -> BpgnnModel:
    path = os.fspath(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"{path}: invalid checkpoint JSON: {err}") from err
    if not isinstance(doc, dict) or "config" not in doc or "params" not in doc:
        raise ValueError(f"{path}: checkpoint must contain 'config' and 'params'")
    try:
        config = BpgnnConfig(**doc["config"])
    except TypeError as err:
        raise ValueError(f"{path}: bad config block: {err}") from err
    model = BpgnnModel(config, instance)
    saved = doc["params"]
    missing = sorted(set(model.params) - set(saved))
    extra = sorted(set(saved) - set(model.params))
    if missing:
        raise ValueError(f"{path}: checkpoint is missing parameter {missing[0]!r}")
    if extra:
        raise ValueError(f"{path}: checkpoint has unknown parameter {extra[0]!r}")
    for name, t in model.params.items():
        entry = saved[name]
        shape = tuple(entry["shape"])
        if shape != t.data.shape:
            raise ValueError(
                f"{path}: parameter {name!r} has shape {shape}, "
                f"expected {t.data.shape}"
            )
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != t.data.size:
            raise ValueError(
                f"{path}: parameter {name!r} has {data.size} values, "
                f"expected {t.data.size}"
            )
        t.data = data.reshape(shape)
    return model
