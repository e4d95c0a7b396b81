"""Radius regressors: a one-hidden-layer ReLU network trained with Adam, and least squares.

Inputs (bucket signature and ``k``) and targets are standardised before
fitting; predictions are mapped back to radii, clamped and rounded.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radius_lsh.radius_model import TrainingSet


@dataclass
class MLPConfig:
    hidden: int = 100
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    l2: float = 1e-4
    batch_size: int = 200
    max_epochs: int = 200
    tol: float = 1e-4
    patience: int = 10
    seed: int = 0


class MLP:
    def __init__(self, w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray):
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2
        self.loss_curve: list[float] = []

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray, cfg: MLPConfig | None = None) -> "MLP":
        cfg = cfg or MLPConfig()
        rng = np.random.default_rng(cfg.seed)
        n, f = x.shape
        h = cfg.hidden

        def glorot(fan_in, fan_out):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            return (rng.uniform(-bound, bound, (fan_in, fan_out)),
                    rng.uniform(-bound, bound, fan_out))

        w1, b1 = glorot(f, h)
        w2, b2 = glorot(h, 1)
        params = [w1, b1, w2, b2]
        m1 = [np.zeros_like(p) for p in params]
        m2 = [np.zeros_like(p) for p in params]
        model = cls(*params)

        batch = min(cfg.batch_size, n)
        y = y.reshape(-1, 1)
        best, stale, step = math.inf, 0, 0
        for _ in range(cfg.max_epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                xb, yb = x[idx], y[idx]
                pre = xb @ w1 + b1
                act = np.maximum(pre, 0.0)
                err = act @ w2 + b2 - yb
                nb = idx.size
                total += 0.5 * float(np.sum(err * err))

                g_out = err / nb
                g_w2 = act.T @ g_out + cfg.l2 * w2 / nb
                g_b2 = g_out.sum(axis=0)
                g_hidden = (g_out @ w2.T) * (pre > 0)
                g_w1 = xb.T @ g_hidden + cfg.l2 * w1 / nb
                g_b1 = g_hidden.sum(axis=0)

                step += 1
                corr1 = 1.0 - cfg.beta1 ** step
                corr2 = 1.0 - cfg.beta2 ** step
                for p, g, a, v in zip(params, (g_w1, g_b1, g_w2, g_b2), m1, m2):
                    a *= cfg.beta1
                    a += (1.0 - cfg.beta1) * g
                    v *= cfg.beta2
                    v += (1.0 - cfg.beta2) * g * g
                    p -= cfg.learning_rate * (a / corr1) / (np.sqrt(v / corr2) + cfg.epsilon)

            penalty = 0.5 * cfg.l2 * (float(np.sum(w1 * w1)) + float(np.sum(w2 * w2)))
            loss = (total + penalty) / n
            model.loss_curve.append(loss)
            # stop once the loss has not improved by tol for `patience` epochs
            if loss > best - cfg.tol:
                stale += 1
            else:
                stale = 0
            best = min(best, loss)
            if stale >= cfg.patience:
                break
        return model

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (np.maximum(x @ self.w1 + self.b1, 0.0) @ self.w2 + self.b2)[:, 0]


class Linear:
    def __init__(self, coef: np.ndarray, intercept: float):
        self.coef = coef
        self.intercept = float(intercept)

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray) -> "Linear":
        design = np.column_stack([x, np.ones(x.shape[0])])
        sol, *_ = np.linalg.lstsq(design, y, rcond=None)
        return cls(sol[:-1], sol[-1])

    def predict(self, x: np.ndarray) -> np.ndarray:
        return x @ self.coef + self.intercept


def _standardise(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    scale = values.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


@dataclass
class RadiusPredictor:
    kind: str
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    model: MLP | Linear
    max_radius: int = 1 << 30
    cv_mse: float = math.nan
    cv_r2: float = math.nan
    extra: dict = field(default_factory=dict)

    def predict_scaled(self, features: np.ndarray) -> np.ndarray:
        """Model output in standardised target units."""
        x = (np.atleast_2d(features) - self.x_mean) / self.x_scale
        out = self.model.predict(x)
        return np.where(np.isfinite(out), out, 0.0)

    def predict_radii(self, features: np.ndarray) -> np.ndarray:
        raw = self.predict_scaled(features) * self.y_scale + self.y_mean
        return np.clip(np.rint(raw), 1, self.max_radius).astype(np.int64)

    def predict(self, sig: np.ndarray, k: int) -> int:
        """Predicted window radius for one query signature and ``k``."""
        features = np.append(np.asarray(sig, dtype=np.float64), float(k))
        return int(self.predict_radii(features[None, :])[0])


def fit_predictor(x: np.ndarray, y: np.ndarray, kind: str = "mlp", cfg: MLPConfig | None = None,
                  max_radius: int = 1 << 30) -> RadiusPredictor:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x_mean, x_scale = _standardise(x)
    y_mean, y_scale = _standardise(y)
    xs = (x - x_mean) / x_scale
    ys = (y - y_mean) / y_scale
    if kind == "mlp":
        model = MLP.fit(xs, ys, cfg)
    elif kind == "linear":
        model = Linear.fit(xs, ys)
    else:
        raise ValueError(f"unknown regressor kind {kind!r}")
    return RadiusPredictor(kind, x_mean, x_scale, float(y_mean), float(y_scale), model, max_radius)


def cross_validate(x: np.ndarray, y: np.ndarray, kind: str, folds: int = 10,
                   cfg: MLPConfig | None = None, seed: int = 0) -> tuple[float, float]:
    """Held-out MSE and R^2 in standardised target units, pooled over ``folds`` folds.

    Each fold standardises with statistics of its own training part; held-out
    targets are scaled with those same statistics.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if n < folds:
        raise ValueError(f"need at least {folds} samples for {folds}-fold cross-validation")
    order = np.random.default_rng(seed).permutation(n)
    sq_err, sq_tot = 0.0, 0.0
    for part in np.array_split(order, folds):
        train = np.setdiff1d(order, part, assume_unique=True)
        pred = fit_predictor(x[train], y[train], kind, cfg)
        truth = (y[part] - pred.y_mean) / pred.y_scale
        guess = pred.predict_scaled(x[part])
        sq_err += float(np.sum((guess - truth) ** 2))
        sq_tot += float(np.sum((truth - truth.mean()) ** 2))
    mse = sq_err / n
    r2 = 1.0 - sq_err / sq_tot if sq_tot > 0 else math.nan
    return mse, r2


def train(samples: TrainingSet, kind: str = "mlp", cfg: MLPConfig | None = None,
          cv_folds: int = 0, max_radius: int = 1 << 30, seed: int = 0) -> RadiusPredictor:
    """Fit a radius predictor; ``cv_folds > 1`` also records cross-validated MSE and R^2."""
    if len(samples) < 10:
        raise ValueError(f"need at least 10 training samples, got {len(samples)}")
    x, y = samples.features, samples.targets.astype(np.float64)
    predictor = fit_predictor(x, y, kind, cfg, max_radius)
    if cv_folds > 1:
        predictor.cv_mse, predictor.cv_r2 = cross_validate(x, y, kind, cv_folds, cfg, seed)
    return predictor


# Predictor file: header, normalisation arrays, then model weights, all little-endian.
PREDICTOR_MAGIC = b"LSHPRED\x00"
PREDICTOR_VERSION = 1
_PRED_HEADER = struct.Struct("<8sIBIIddQdd")
_KINDS = {"mlp": 0, "linear": 1}


def save_predictor(pred: RadiusPredictor, path: str | Path) -> None:
    n_features = pred.x_mean.shape[0]
    hidden = pred.model.w1.shape[1] if pred.kind == "mlp" else 0
    parts = [pred.x_mean, pred.x_scale]
    if pred.kind == "mlp":
        parts += [pred.model.w1.ravel(), pred.model.b1, pred.model.w2.ravel(), pred.model.b2]
    else:
        parts += [pred.model.coef, np.array([pred.model.intercept])]
    with open(path, "wb") as fh:
        fh.write(_PRED_HEADER.pack(PREDICTOR_MAGIC, PREDICTOR_VERSION, _KINDS[pred.kind],
                                   n_features, hidden, pred.y_mean, pred.y_scale,
                                   pred.max_radius, pred.cv_mse, pred.cv_r2))
        fh.write(np.concatenate(parts).astype("<f8").tobytes())


def load_predictor(path: str | Path) -> RadiusPredictor:
    raw = Path(path).read_bytes()
    magic, version, kind_id, f, h, y_mean, y_scale, max_radius, mse, r2 = \
        _PRED_HEADER.unpack_from(raw)
    if magic != PREDICTOR_MAGIC:
        raise ValueError(f"{path}: not a radius predictor file")
    if version != PREDICTOR_VERSION:
        raise ValueError(f"{path}: unsupported predictor version {version}")
    kind = {v: k for k, v in _KINDS.items()}[kind_id]
    body = np.frombuffer(raw, dtype="<f8", offset=_PRED_HEADER.size).astype(np.float64)
    x_mean, x_scale, rest = body[:f], body[f:2 * f], body[2 * f:]
    if kind == "mlp":
        sizes = [f * h, h, h, 1]
        if rest.size != sum(sizes):
            raise ValueError(f"{path}: weight block has {rest.size} values, expected {sum(sizes)}")
        w1, b1, w2, b2 = np.split(rest, np.cumsum(sizes)[:-1])
        model = MLP(w1.reshape(f, h), b1, w2.reshape(h, 1), b2)
    else:
        if rest.size != f + 1:
            raise ValueError(f"{path}: expected {f + 1} linear weights, found {rest.size}")
        model = Linear(rest[:f], rest[f])
    return RadiusPredictor(kind, x_mean, x_scale, y_mean, y_scale, model, max_radius, mse, r2)
