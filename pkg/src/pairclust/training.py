"""Minibatch SGD driver for membership training from pairwise annotations.

Each step forwards both endpoints of a batch of annotated pairs, evaluates
the pairwise logistic loss (optionally through the learnable interaction
matrix) plus the volume regularizer on the batch membership block, and takes
plain SGD steps with separate learning rates for the network and the
interaction logits. Everything is deterministic given the config seed.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import AnnotationSet
from .exceptions import ConfigError, DataError, DivergenceError
from .loss import PairBatch, grad_bprime, loss_cc, loss_vol
from .model import b_matrix, backward, forward, init_params


@dataclass
class TrainConfig:
    """Everything the training criterion leaves open.

    learn_b = False pins the pair-interaction matrix to identity (plain
    pairwise logistic training); learn_b = True trains the sigmoid-
    parameterized interaction matrix alongside the network. lam scales the
    volume regularizer; vol_on_full_matrix switches it from the minibatch
    membership block to the full seen matrix (diagnostic, slow).
    """

    n_clusters: int = 3
    hidden_dims: tuple = (64, 64)
    lr_theta: float = 0.5
    lr_bprime: float = 0.1
    batch_pairs: int = 128
    epochs: int = 200
    lam: float = 0.0
    clamp: float = 1e-6
    ridge: float = 1e-8
    seed: int = 0
    learn_b: bool = False
    vol_on_full_matrix: bool = False
    lambda_grid: tuple | None = None
    patience: int = 20

    def validate(self):
        if self.lr_theta <= 0 or self.lr_bprime <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch_pairs < 1 or self.epochs < 1:
            raise ConfigError("batch_pairs and epochs must be at least 1")
        if self.n_clusters < 2:
            raise ConfigError(f"need n_clusters >= 2, got {self.n_clusters}")
        if not 0.0 < self.clamp < 0.5:
            raise ConfigError(f"clamp must lie in (0, 0.5), got {self.clamp}")
        if self.lam < 0 or self.ridge < 0:
            raise ConfigError("lam and ridge must be nonnegative")
        if self.lam > 0 and not self.vol_on_full_matrix and self.batch_pairs < self.n_clusters:
            raise ConfigError("batch_pairs must be >= n_clusters when lam > 0")


@dataclass
class EpochRecord:
    epoch: int
    cc: float
    vol: float
    clamp_hits: int
    seconds: float


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def save_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write("epoch,cc,vol,clamp_hits,seconds\n")
            for r in self.records:
                f.write(f"{r.epoch},{r.cc!r},{r.vol!r},{r.clamp_hits},{r.seconds!r}\n")

    @staticmethod
    def load_csv(path):
        log = TrainLog()
        with open(path) as f:
            header = f.readline().strip()
            if header != "epoch,cc,vol,clamp_hits,seconds":
                raise DataError(f"unexpected train-log header: {header}")
            for line in f:
                e, cc, vol, hits, sec = line.strip().split(",")
                log.records.append(
                    EpochRecord(int(e), float(cc), float(vol), int(hits), float(sec))
                )
        return log


def pair_loss_value(params, x_features, ann, b, clamp=1e-6):
    """Mean pairwise logistic loss of a parameter set on an annotation set."""
    xb = x_features[:, np.concatenate([ann.i, ann.j])]
    m, _ = forward(params, xb)
    n = len(ann)
    batch = PairBatch(m[:, :n], m[:, n:], ann.y)
    return loss_cc(batch, b, clamp).value


def split_validation(ann, fraction=0.1, seed=0):
    """Carve a held-out validation subset from an annotation set."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"fraction must lie in (0, 1), got {fraction}")
    n_val = max(1, int(round(len(ann) * fraction)))
    if n_val >= len(ann):
        raise ConfigError("annotation set too small to split")
    order = np.random.default_rng(seed).permutation(len(ann))
    return ann.subset(order[n_val:]), ann.subset(order[:n_val])


def train(x_features, ann, cfg, validation=None):
    """Run SGD and return ``(params, log)``.

    ``x_features`` is D x N with annotation indices addressing its columns.
    When a validation annotation set is given, training early-stops once its
    pairwise loss has not improved for ``cfg.patience`` epochs and the best
    parameters seen are restored.
    """
    cfg.validate()
    x = np.asarray(x_features, dtype=np.float64)
    if not isinstance(ann, AnnotationSet) or len(ann) == 0:
        raise DataError("need a non-empty AnnotationSet")
    if ann.n > x.shape[1]:
        raise DataError(
            f"annotations address {ann.n} samples but features have {x.shape[1]} columns"
        )
    k = cfg.n_clusters
    dims = [x.shape[0], *cfg.hidden_dims, k]
    params = init_params(dims, cfg.seed)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    identity = np.eye(k)

    log = TrainLog()
    n_ann = len(ann)
    n_steps = (n_ann + cfg.batch_pairs - 1) // cfg.batch_pairs
    best_val = np.inf
    best_params = None
    stale_epochs = 0
    global_step = 0

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(n_ann)
        cc_sum = 0.0
        vol_sum = 0.0
        hits = 0
        for start in range(0, n_ann, cfg.batch_pairs):
            idx = order[start : start + cfg.batch_pairs]
            bsz = len(idx)
            xb = x[:, np.concatenate([ann.i[idx], ann.j[idx]])]
            m, tape = forward(params, xb)
            if not np.all(np.isfinite(m)):
                raise DivergenceError(
                    f"non-finite memberships at step {global_step}", step=global_step
                )
            batch = PairBatch(m[:, :bsz], m[:, bsz:], ann.y[idx])
            if cfg.learn_b:
                b_mat, _ = b_matrix(params)
            else:
                b_mat = identity
            cc = loss_cc(batch, b_mat, cfg.clamp)
            grad_m = np.concatenate([cc.grad_left, cc.grad_right], axis=1)

            vol_val = 0.0
            full_grads = None
            if cfg.lam > 0 and cfg.vol_on_full_matrix:
                m_full, tape_full = forward(params, x)
                vol_val, vol_grad = loss_vol(m_full, cfg.lam, cfg.ridge)
                full_grads = backward(params, tape_full, vol_grad)
            elif cfg.lam > 0 and 2 * bsz >= k:
                # volume term on the K x 2B membership block of this batch
                vol_val, vol_grad = loss_vol(m, cfg.lam, cfg.ridge)
                grad_m += vol_grad

            if not np.isfinite(cc.value) or not np.isfinite(vol_val):
                raise DivergenceError(
                    f"non-finite loss at step {global_step}", step=global_step
                )
            grads = backward(params, tape, grad_m)
            for w, dw in zip(params.weights, grads.weights):
                w -= cfg.lr_theta * dw
            for b, db in zip(params.biases, grads.biases):
                b -= cfg.lr_theta * db
            if full_grads is not None:
                for w, dw in zip(params.weights, full_grads.weights):
                    w -= cfg.lr_theta * dw
                for b, db in zip(params.biases, full_grads.biases):
                    b -= cfg.lr_theta * db
            if cfg.learn_b:
                params.b_logits -= cfg.lr_bprime * grad_bprime(cc.grad_b, b_mat)

            cc_sum += cc.value
            vol_sum += vol_val
            hits += cc.clamp_hits
            global_step += 1

        if not all(
            np.all(np.isfinite(t))
            for t in (*params.weights, *params.biases, params.b_logits)
        ):
            raise DivergenceError(
                f"non-finite parameters after step {global_step - 1}",
                step=global_step - 1,
            )
        log.records.append(
            EpochRecord(
                epoch=epoch,
                cc=cc_sum / n_steps,
                vol=vol_sum / n_steps,
                clamp_hits=hits,
                seconds=time.perf_counter() - t0,
            )
        )

        if validation is not None:
            b_mat = b_matrix(params)[0] if cfg.learn_b else identity
            val = pair_loss_value(params, x, validation, b_mat, cfg.clamp)
            if val < best_val:
                best_val = val
                best_params = params.copy()
                stale_epochs = 0
            else:
                stale_epochs += 1
                if stale_epochs >= cfg.patience:
                    break

    if best_params is not None:
        params = best_params
    return params, log


@dataclass
class LambdaResult:
    lam: float
    val_cc: float
    params: object = None
    log: TrainLog | None = None
    error: str | None = None


def select_lambda(x_features, ann, cfg, validation):
    """Train once per grid value and pick the regularization weight whose
    model has the lowest held-out pairwise loss (ties go to the smaller value).

    Divergent runs are recorded with an error note and skipped rather than
    aborting the sweep. Returns ``(best_lambda, results)``.
    """
    if not cfg.lambda_grid:
        raise ConfigError("select_lambda needs a non-empty cfg.lambda_grid")
    if validation is None or len(validation) == 0:
        raise ConfigError("select_lambda needs a non-empty validation set")
    results = []
    identity = np.eye(cfg.n_clusters)
    for lam in sorted(cfg.lambda_grid):
        cfg_lam = replace(cfg, lam=float(lam))
        try:
            params, log = train(x_features, ann, cfg_lam, validation=validation)
            b_mat = b_matrix(params)[0] if cfg.learn_b else identity
            val = pair_loss_value(params, x_features, validation, b_mat, cfg.clamp)
            results.append(LambdaResult(float(lam), val, params, log))
        except DivergenceError as err:
            results.append(LambdaResult(float(lam), np.inf, error=str(err)))
    best = None
    for r in results:
        if r.error is None and (best is None or r.val_cc < best.val_cc):
            best = r
    if best is None:
        raise DivergenceError("every grid value diverged")
    return best.lam, results
