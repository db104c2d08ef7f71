"""Stochastic gradient descent learning of GLVQ prototypes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from numba import njit

from .activation import deriv_kernel, eval_kernel
from .core import ConfigurationError, GlvqModel, PrototypeSet, Projection
from .data import Dataset

__all__ = [
    "InitStrategy",
    "ConvergenceMeasure",
    "TrainConfig",
    "EpochStats",
    "TrainResult",
    "init_prototypes",
    "epoch_permutation",
    "train_epoch",
    "detect_convergence",
    "train",
]


class InitStrategy(str, enum.Enum):
    CLASS_MEAN_JITTER = "class_mean_jitter"
    RANDOM_SAMPLE = "random_sample"


class ConvergenceMeasure(str, enum.Enum):
    # mean over samples of the per-sample winner-gradient norm
    MEAN_NORM = "mean_norm"
    # norm of the epoch-averaged prototype gradient
    NORM_OF_MEAN = "norm_of_mean"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    max_epochs: int = 10000
    convergence_epsilon: float = 1e-4
    convergence_window: int = 10
    convergence_measure: ConvergenceMeasure = ConvergenceMeasure.NORM_OF_MEAN
    seed: int = 0
    init_strategy: InitStrategy = InitStrategy.CLASS_MEAN_JITTER
    jitter_scale: float = 0.05
    prototypes_per_class: int = 1

    def __post_init__(self):
        object.__setattr__(self, "init_strategy", InitStrategy(self.init_strategy))
        object.__setattr__(self, "convergence_measure", ConvergenceMeasure(self.convergence_measure))
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigurationError("learning_rate must be finite and non-negative")
        if int(self.max_epochs) < 1:
            raise ConfigurationError("max_epochs must be >= 1")
        if not (math.isfinite(self.convergence_epsilon) and self.convergence_epsilon > 0):
            raise ConfigurationError("convergence_epsilon must be > 0")
        if int(self.convergence_window) < 1:
            raise ConfigurationError("convergence_window must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if not (math.isfinite(self.jitter_scale) and self.jitter_scale >= 0):
            raise ConfigurationError("jitter_scale must be >= 0")
        if int(self.prototypes_per_class) < 1:
            raise ConfigurationError("prototypes_per_class must be >= 1")

    @classmethod
    def from_mapping(cls, values: dict) -> TrainConfig:
        """Build from string or typed values, e.g. a parsed ``key=value`` file."""
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ConfigurationError(f"unknown training option {key!r}")
            if types[key] == "int":
                kwargs[key] = int(raw)
            elif types[key] == "float":
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw.strip() if isinstance(raw, str) else raw
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> TrainConfig:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return cls.from_mapping(values)

    def with_overrides(self, **overrides) -> TrainConfig:
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_grad_norm: float
    avg_grad_norm: float
    cost: float
    train_accuracy: float
    skipped_degenerate: int


@dataclass
class TrainResult:
    model: GlvqModel
    history: list[EpochStats] = field(default_factory=list)
    converged: bool = False
    convergence_epoch: int | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.history)


def init_prototypes(
    dataset: Dataset,
    prototypes_per_class: int = 1,
    strategy: InitStrategy | str = InitStrategy.CLASS_MEAN_JITTER,
    jitter_scale: float = 0.0,
    rng: np.random.Generator | None = None,
    projection: Projection | None = None,
) -> PrototypeSet:
    """Place ``prototypes_per_class`` prototypes per class in projection space."""
    strategy = InitStrategy(strategy)
    if prototypes_per_class < 1:
        raise ConfigurationError("prototypes_per_class must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    Z = (projection or Projection()).apply(dataset.X)
    scale = jitter_scale * Z.std(axis=0)
    vectors, labels = [], []
    for c in range(dataset.n_classes):
        members = Z[dataset.y == c]
        if members.shape[0] == 0:
            raise ConfigurationError(f"class {dataset.class_names[c]!r} has no samples")
        for _ in range(prototypes_per_class):
            if strategy is InitStrategy.CLASS_MEAN_JITTER:
                base = members.mean(axis=0)
            else:
                base = members[rng.integers(members.shape[0])]
            vectors.append(base + rng.normal(size=base.shape) * scale)
            labels.append(c)
    return PrototypeSet(np.array(vectors), labels)


# ---------------------------------------------------------------------------
# compiled epoch loop


@njit(cache=True)
def _winners(z, label, W, wlab):
    plus = -1
    minus = -1
    dp = np.inf
    dm = np.inf
    for k in range(W.shape[0]):
        d = 0.0
        for j in range(W.shape[1]):
            t = z[j] - W[k, j]
            d += t * t
        if wlab[k] == label:
            if d < dp:
                dp = d
                plus = k
        elif d < dm:
            dm = d
            minus = k
    return plus, minus, dp, dm


@njit(cache=True)
def _evaluate(Z, y, W, wlab, kind, beta, gamma):
    total = 0.0
    correct = 0
    for i in range(Z.shape[0]):
        plus, minus, dp, dm = _winners(Z[i], y[i], W, wlab)
        if dp < dm or (dp == dm and plus < minus):
            correct += 1
        eta = dp + dm
        if eta > 0.0:
            total += eval_kernel(kind, beta, (dp - dm) / eta - gamma)
    return total, correct / Z.shape[0]


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def epoch_permutation(seed, epoch, m):
    """Fisher-Yates shuffle driven by a counter-based hash of (seed, epoch, position)."""
    key = _splitmix64(_splitmix64(np.uint64(seed)) ^ np.uint64(epoch))
    perm = np.arange(m)
    for i in range(m - 1, 0, -1):
        r = _splitmix64(key + np.uint64(i))
        j = int((r >> np.uint64(11)) * (1.0 / 9007199254740992.0) * (i + 1))
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
    return perm


@njit(cache=True)
def _epoch(Z, y, W, wlab, kind, beta, alpha, mode, gamma, lr, perm, G, gp, gm, out):
    # one SGD pass; fills out = (mean_grad_norm, avg_grad_norm, cost, accuracy, skipped)
    p = W.shape[1]
    G[:] = 0.0
    total_norm = 0.0
    used = 0
    skipped = 0
    for idx in perm:
        z = Z[idx]
        plus, minus, dp, dm = _winners(z, y[idx], W, wlab)
        eta = dp + dm
        if eta <= 0.0:
            skipped += 1
            continue
        mu = (dp - dm) / eta - gamma
        fprime = deriv_kernel(kind, beta, alpha, mode, mu)
        a = -4.0 * fprime * dm / (eta * eta)
        b = 4.0 * fprime * dp / (eta * eta)
        sq = 0.0
        for j in range(p):
            gp[j] = a * (z[j] - W[plus, j])
            gm[j] = b * (z[j] - W[minus, j])
            sq += gp[j] * gp[j] + gm[j] * gm[j]
        for j in range(p):
            W[plus, j] -= lr * gp[j]
            W[minus, j] -= lr * gm[j]
            G[plus, j] += gp[j]
            G[minus, j] += gm[j]
        total_norm += math.sqrt(sq)
        used += 1
    out[0] = total_norm / used if used else 0.0
    out[1] = math.sqrt(np.sum(G * G)) / used if used else 0.0
    out[2], out[3] = _evaluate(Z, y, W, wlab, kind, beta, gamma)
    out[4] = skipped


@njit(cache=True)
def _train_loop(Z, y, W, wlab, kind, beta, alpha, mode, gamma, lr, seed, max_epochs,
                eps, window, use_mean_norm, out):
    G = np.zeros_like(W)
    gp = np.empty(W.shape[1])
    gm = np.empty(W.shape[1])
    streak = 0
    for e in range(max_epochs):
        perm = epoch_permutation(seed, e, Z.shape[0])
        _epoch(Z, y, W, wlab, kind, beta, alpha, mode, gamma, lr, perm, G, gp, gm, out[e])
        measure = out[e, 0] if use_mean_norm else out[e, 1]
        streak = streak + 1 if measure < eps else 0
        if streak >= window:
            return e + 1, True
    return max_epochs, False


def _check_classes(y: np.ndarray, wlab: np.ndarray) -> None:
    protos = set(wlab.tolist())
    missing = set(np.unique(y).tolist()) - protos
    if missing:
        raise ConfigurationError(f"no prototype for classes {sorted(missing)}")
    if len(protos) < 2:
        raise ConfigurationError("prototypes of at least two classes are required")


def _kernel_args(model: GlvqModel):
    act = model.activation
    return act.kind.code, act.beta, act.alpha, act.mode.code, float(model.gamma)


def _stats(out: np.ndarray, first_epoch: int) -> list[EpochStats]:
    return [
        EpochStats(first_epoch + i, float(r[0]), float(r[1]), float(r[2]), float(r[3]), int(r[4]))
        for i, r in enumerate(out)
    ]


def train_epoch(model: GlvqModel, dataset: Dataset, lr: float, rng: np.random.Generator, epoch: int = 1) -> EpochStats:
    """One shuffled pass of per-sample updates; ``model`` is updated in place."""
    Z = np.ascontiguousarray(model.projection.apply(dataset.X))
    wlab = model.prototypes.labels
    _check_classes(dataset.y, wlab)
    W = np.ascontiguousarray(model.prototypes.vectors)
    perm = rng.permutation(len(dataset))
    out = np.zeros(5)
    p = W.shape[1]
    _epoch(Z, dataset.y, W, wlab, *_kernel_args(model), float(lr), perm,
           np.zeros_like(W), np.empty(p), np.empty(p), out)
    model.prototypes.vectors = W
    return _stats(out[None, :], epoch)[0]


def detect_convergence(history: list[EpochStats], epsilon: float, window: int,
                       measure: ConvergenceMeasure | str = ConvergenceMeasure.MEAN_NORM) -> bool:
    if len(history) < window:
        return False
    attr = "mean_grad_norm" if ConvergenceMeasure(measure) is ConvergenceMeasure.MEAN_NORM else "avg_grad_norm"
    return all(getattr(s, attr) < epsilon for s in history[-window:])


def train(dataset: Dataset, model: GlvqModel, config: TrainConfig) -> TrainResult:
    """Train a copy of ``model`` until convergence or ``config.max_epochs``."""
    model = model.copy()
    Z = np.ascontiguousarray(model.projection.apply(dataset.X))
    wlab = model.prototypes.labels
    _check_classes(dataset.y, wlab)
    W = np.ascontiguousarray(model.prototypes.vectors)
    args = _kernel_args(model)
    use_mean = config.convergence_measure is ConvergenceMeasure.MEAN_NORM

    out = np.zeros((int(config.max_epochs), 5))
    done, converged = _train_loop(
        Z, dataset.y, W, wlab, *args, float(config.learning_rate), np.uint64(config.seed),
        int(config.max_epochs), float(config.convergence_epsilon), int(config.convergence_window),
        use_mean, out,
    )
    history = _stats(out[:done], 1)
    model.prototypes.vectors = W
    return TrainResult(model, history, converged, len(history) if converged else None)
