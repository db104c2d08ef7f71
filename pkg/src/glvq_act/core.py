"""GLVQ model state, distances, winner search, losses and prototype gradients."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .activation import ActivationSpec, derivative, evaluate, parse_activation

__all__ = [
    "GlvqError",
    "ConfigurationError",
    "DegenerateSampleError",
    "Projection",
    "PrototypeSet",
    "GlvqModel",
    "WinnerPair",
    "PrototypeGradient",
    "project",
    "sq_euclidean",
    "wta",
    "predict",
    "winner_pair",
    "classifier_mu",
    "hypothesis_margin",
    "hypothesis_margin_vector",
    "local_loss",
    "local_loss_perceptron",
    "cost",
    "grad_local",
    "model_to_json",
    "model_from_json",
]


class GlvqError(ValueError):
    pass


class ConfigurationError(GlvqError):
    """Model and data are inconsistent (dimensions, missing classes)."""


class DegenerateSampleError(GlvqError):
    """The sample coincides with both winners, so mu is undefined."""


@dataclass(frozen=True)
class Projection:
    """Fixed map from data space into prototype space.

    ``kind`` is ``"identity"``, ``"linear"`` (``matrix`` is p x n) or
    ``"diagonal"`` (``matrix`` holds the n relevance weights).
    """

    kind: str = "identity"
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "identity":
            if self.matrix is not None:
                raise ConfigurationError("identity projection takes no matrix")
            return
        if self.kind not in ("linear", "diagonal"):
            raise ConfigurationError(f"unknown projection kind {self.kind!r}")
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        want = 2 if self.kind == "linear" else 1
        if m.ndim != want or m.size == 0:
            raise ConfigurationError(f"{self.kind} projection needs a non-empty {want}-d array")
        if not np.all(np.isfinite(m)):
            raise ConfigurationError("projection entries must be finite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> Projection:
        return cls()

    @classmethod
    def linear(cls, omega) -> Projection:
        return cls("linear", omega)

    @classmethod
    def diagonal(cls, weights) -> Projection:
        return cls("diagonal", weights)

    @property
    def input_dim(self) -> int | None:
        if self.kind == "identity":
            return None
        return self.matrix.shape[-1]

    def output_dim(self, input_dim: int) -> int:
        return self.matrix.shape[0] if self.kind == "linear" else input_dim

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Project one vector or a stack of row vectors."""
        X = np.asarray(X, dtype=float)
        if self.kind == "identity":
            return X
        if X.shape[-1] != self.matrix.shape[-1]:
            raise ConfigurationError(
                f"input dimension {X.shape[-1]} does not match projection input {self.matrix.shape[-1]}"
            )
        if self.kind == "linear":
            return X @ self.matrix.T
        return X * self.matrix

    def to_dict(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity"}
        key = "matrix" if self.kind == "linear" else "weights"
        return {"kind": self.kind, key: self.matrix.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Projection:
        kind = d.get("kind", "identity")
        if kind == "identity":
            return cls()
        return cls(kind, d["matrix"] if kind == "linear" else d["weights"])


@dataclass
class PrototypeSet:
    vectors: np.ndarray  # (N, p)
    labels: np.ndarray  # (N,) int

    def __post_init__(self):
        self.vectors = np.array(self.vectors, dtype=float)
        self.labels = np.array(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] == 0:
            raise ConfigurationError("prototype vectors must be a non-empty (N, p) array")
        if self.labels.shape != (self.vectors.shape[0],):
            raise ConfigurationError("need exactly one label per prototype")
        if not np.all(np.isfinite(self.vectors)):
            raise ConfigurationError("prototype vectors must be finite")

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def copy(self) -> PrototypeSet:
        return PrototypeSet(self.vectors.copy(), self.labels.copy())


@dataclass
class GlvqModel:
    prototypes: PrototypeSet
    activation: ActivationSpec
    projection: Projection = field(default_factory=Projection)
    gamma: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.gamma):
            raise ConfigurationError("gamma must be finite")
        n_in = self.projection.input_dim
        if self.projection.kind == "linear" and self.projection.matrix.shape[0] != self.prototypes.dim:
            raise ConfigurationError("projection output dimension differs from prototype dimension")
        if self.projection.kind == "diagonal" and n_in != self.prototypes.dim:
            raise ConfigurationError("diagonal projection length differs from prototype dimension")

    @property
    def input_dim(self) -> int:
        n_in = self.projection.input_dim
        return self.prototypes.dim if n_in is None else n_in

    def copy(self) -> GlvqModel:
        return replace(self, prototypes=self.prototypes.copy())


class WinnerPair(NamedTuple):
    plus_index: int
    minus_index: int
    d_plus: float
    d_minus: float


class PrototypeGradient(NamedTuple):
    """dl/dw for the two winners; every other prototype has zero gradient."""

    plus_index: int
    minus_index: int
    grad_plus: np.ndarray
    grad_minus: np.ndarray


def project(projection: Projection, x) -> np.ndarray:
    return projection.apply(x)


def sq_euclidean(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigurationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(diff @ diff)


def _distances(x, model: GlvqModel) -> np.ndarray:
    z = model.projection.apply(x)
    if z.shape != (model.prototypes.dim,):
        raise ConfigurationError(f"sample of shape {np.shape(x)} does not fit a {model.input_dim}-d model")
    diff = model.prototypes.vectors - z
    return np.einsum("ij,ij->i", diff, diff)


def wta(x, model: GlvqModel) -> int:
    """Index of the nearest prototype; ties go to the lowest index."""
    return int(np.argmin(_distances(x, model)))


def predict(x, model: GlvqModel) -> int:
    return int(model.prototypes.labels[wta(x, model)])


def winner_pair(x, label: int, model: GlvqModel) -> WinnerPair:
    d = _distances(x, model)
    same = model.prototypes.labels == label
    if not same.any():
        raise ConfigurationError(f"no prototype for class {label}")
    if same.all():
        raise ConfigurationError(f"no prototype outside class {label}")
    plus = int(np.flatnonzero(same)[np.argmin(d[same])])
    minus = int(np.flatnonzero(~same)[np.argmin(d[~same])])
    return WinnerPair(plus, minus, float(d[plus]), float(d[minus]))


def classifier_mu(d_plus: float, d_minus: float, gamma: float = 0.0) -> float:
    eta = d_plus + d_minus
    if eta <= 0.0:
        raise DegenerateSampleError("sample coincides with prototypes of two classes")
    return (d_plus - d_minus) / eta - gamma


def hypothesis_margin(d_plus: float, d_minus: float) -> float:
    return 0.5 * abs(d_minus - d_plus)


def hypothesis_margin_vector(x, label: int, model: GlvqModel) -> np.ndarray:
    wp = winner_pair(x, label, model)
    W = model.prototypes.vectors
    return W[wp.minus_index] - W[wp.plus_index]


def local_loss(x, label: int, model: GlvqModel) -> float:
    wp = winner_pair(x, label, model)
    return evaluate(model.activation, classifier_mu(wp.d_plus, wp.d_minus, model.gamma))


def local_loss_perceptron(x, label: int, model: GlvqModel) -> float:
    """Local loss written as a perceptron acting on the scaled sample.

    The excitation is ``<2 pi(x)/eta, w- - w+> + B`` with bias
    ``B = (|w+|^2 - |w-|^2)/eta - gamma``.
    """
    wp = winner_pair(x, label, model)
    eta = wp.d_plus + wp.d_minus
    if eta <= 0.0:
        raise DegenerateSampleError("sample coincides with prototypes of two classes")
    z = model.projection.apply(x)
    w_plus = model.prototypes.vectors[wp.plus_index]
    w_minus = model.prototypes.vectors[wp.minus_index]
    scaled = 2.0 * z / eta
    h = w_minus - w_plus
    bias = (w_plus @ w_plus - w_minus @ w_minus) / eta - model.gamma
    return evaluate(model.activation, float(scaled @ h + bias))


def cost(X, y, model: GlvqModel) -> float:
    total = 0.0
    for x, label in zip(np.asarray(X, dtype=float), y):
        total += local_loss(x, int(label), model)
    return total


def grad_local(x, label: int, model: GlvqModel) -> PrototypeGradient:
    wp = winner_pair(x, label, model)
    eta = wp.d_plus + wp.d_minus
    mu = classifier_mu(wp.d_plus, wp.d_minus, model.gamma)
    fprime = derivative(model.activation, mu)
    xi_plus = 2.0 * wp.d_minus / eta**2
    xi_minus = -2.0 * wp.d_plus / eta**2
    z = model.projection.apply(x)
    W = model.prototypes.vectors
    g_plus = fprime * xi_plus * -2.0 * (z - W[wp.plus_index])
    g_minus = fprime * xi_minus * -2.0 * (z - W[wp.minus_index])
    return PrototypeGradient(wp.plus_index, wp.minus_index, g_plus, g_minus)


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(model: GlvqModel) -> dict:
    return {
        "dim": model.input_dim,
        "gamma": model.gamma,
        "activation": str(model.activation),
        "deriv_mode": model.activation.mode.value,
        "projection": model.projection.to_dict(),
        "prototypes": [
            {"class": int(c), "vector": v.tolist()}
            for v, c in zip(model.prototypes.vectors, model.prototypes.labels)
        ],
    }


def model_from_dict(d: dict) -> GlvqModel:
    act = parse_activation(d["activation"])
    act = replace(act, mode=d.get("deriv_mode", "exact"))
    protos = PrototypeSet(
        [p["vector"] for p in d["prototypes"]], [p["class"] for p in d["prototypes"]]
    )
    model = GlvqModel(protos, act, Projection.from_dict(d.get("projection", {})), float(d.get("gamma", 0.0)))
    if "dim" in d and d["dim"] != model.input_dim:
        raise ConfigurationError(f"declared dim {d['dim']} differs from prototype/projection dim")
    return model


def model_to_json(model: GlvqModel) -> str:
    # json writes floats with repr, the shortest string that round-trips exactly
    return json.dumps(model_to_dict(model), indent=2)


def model_from_json(text: str) -> GlvqModel:
    return model_from_dict(json.loads(text))
