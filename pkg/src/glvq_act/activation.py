"""Activation functions for the GLVQ classifier function.

Every kind is backed by a scalar numba kernel so the same code path serves
both the Python API (:func:`evaluate`, :func:`derivative`) and the compiled
training loop in :mod:`glvq_act.trainer`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from numba import njit

__all__ = [
    "ActivationKind",
    "ActivationSpec",
    "ActivationError",
    "DEFAULT_ALPHA",
    "TIE_TOLERANCE",
    "evaluate",
    "derivative",
    "quasi_max",
    "parse_activation",
]

DEFAULT_ALPHA = 100.0
TIE_TOLERANCE = 1e-9


class ActivationError(ValueError):
    """Invalid activation parameters or input."""


class ActivationKind(str, enum.Enum):
    SIGMOID = "sigmoid"
    TANH1P = "tanh1p"
    SWISH = "swish"
    SWISHTAU = "swishtau"
    LEAKYRELU = "leakyrelu"
    RELU = "relu"
    MAXSGD = "maxsgd"
    MAXTAU = "maxtau"
    COSXX = "cosxx"
    SOFTPLUS = "softplus"
    IDENTITY = "identity"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def needs_positive_beta(self) -> bool:
        return self in _POSITIVE_BETA

    @property
    def uses_beta(self) -> bool:
        return self not in (ActivationKind.RELU, ActivationKind.IDENTITY)


_CODES = {kind: i for i, kind in enumerate(ActivationKind)}

_POSITIVE_BETA = frozenset(
    {
        ActivationKind.SIGMOID,
        ActivationKind.TANH1P,
        ActivationKind.SWISH,
        ActivationKind.SWISHTAU,
        ActivationKind.SOFTPLUS,
        ActivationKind.LEAKYRELU,
    }
)

# Short names used in the comparison tables, accepted wherever a kind is parsed.
ALIASES = {
    "sgd": ActivationKind.SIGMOID,
    "tau": ActivationKind.TANH1P,
    "swish_tau": ActivationKind.SWISHTAU,
    "lrelu": ActivationKind.LEAKYRELU,
    "m": ActivationKind.MAXSGD,
    "m_tau": ActivationKind.MAXTAU,
    "soft+": ActivationKind.SOFTPLUS,
    "id": ActivationKind.IDENTITY,
}


class DerivMode(str, enum.Enum):
    """How the max-composite kinds (maxsgd, maxtau) are differentiated."""

    EXACT = "exact"  # piecewise branch, quasi-max only at ties
    QUASI = "quasi"  # quasi-max approximation everywhere

    @property
    def code(self) -> int:
        return 0 if self is DerivMode.EXACT else 1


@dataclass(frozen=True)
class ActivationSpec:
    kind: ActivationKind
    beta: float = 1.0
    alpha: float = DEFAULT_ALPHA
    mode: DerivMode = DerivMode.EXACT

    def __post_init__(self):
        object.__setattr__(self, "kind", ActivationKind(self.kind))
        object.__setattr__(self, "mode", DerivMode(self.mode))
        beta = float(self.beta)
        alpha = float(self.alpha)
        if not math.isfinite(beta):
            raise ActivationError(f"beta must be finite, got {beta!r}")
        if not (math.isfinite(alpha) and alpha > 0):
            raise ActivationError(f"alpha must be a positive finite number, got {alpha!r}")
        if self.kind.needs_positive_beta and beta <= 0:
            raise ActivationError(f"{self.kind.value} requires beta > 0, got {beta!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)

    def __str__(self) -> str:
        if not self.kind.uses_beta:
            return self.kind.value
        text = f"{self.kind.value}:{self.beta!r}"
        if self.kind in (ActivationKind.MAXSGD, ActivationKind.MAXTAU) and self.alpha != DEFAULT_ALPHA:
            text += f":{self.alpha!r}"
        return text


def _kind_from_name(name: str) -> ActivationKind:
    name = name.strip().lower()
    if name in ALIASES:
        return ALIASES[name]
    try:
        return ActivationKind(name)
    except ValueError:
        raise ActivationError(f"unknown activation kind {name!r}") from None


def parse_activation(text: str) -> ActivationSpec:
    """Parse ``kind[:beta[:alpha]]``, e.g. ``"swish:1.5"`` or ``"maxsgd:2:100"``."""
    parts = text.strip().split(":")
    if not parts[0] or len(parts) > 3:
        raise ActivationError(f"malformed activation {text!r}")
    kind = _kind_from_name(parts[0])
    try:
        beta = float(parts[1]) if len(parts) > 1 else 1.0
        alpha = float(parts[2]) if len(parts) > 2 else DEFAULT_ALPHA
    except ValueError:
        raise ActivationError(f"malformed activation {text!r}") from None
    return ActivationSpec(kind, beta, alpha)


# ---------------------------------------------------------------------------
# compiled scalar kernels; kind codes follow ActivationKind declaration order

_SIGMOID, _TANH1P, _SWISH, _SWISHTAU, _LEAKYRELU, _RELU, _MAXSGD, _MAXTAU, _COSXX, _SOFTPLUS, _IDENTITY = range(11)


@njit(cache=True)
def _sgd(z):
    # logistic of an already-scaled argument, without overflow
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def _tau(z):
    # tanh(z) + 1 == 2 sgd(2z), free of cancellation as z -> -inf
    return 2.0 * _sgd(2.0 * z)


@njit(cache=True)
def _dtau(z):
    # 1 - tanh(z)^2 == 4 sgd(2z) sgd(-2z)
    return 4.0 * _sgd(2.0 * z) * _sgd(-2.0 * z)


@njit(cache=True)
def _softplus(z):
    return max(z, 0.0) + math.log1p(math.exp(-abs(z)))


@njit(cache=True)
def quasi_max_kernel(a, b, alpha):
    hi = max(a, b)
    lo = min(a, b)
    return hi + math.log1p(math.exp(-alpha * (hi - lo))) / alpha


@njit(cache=True)
def _quasi_max_deriv(x, g, dg, alpha):
    # d/dx of (1/alpha) log(exp(alpha x) + exp(alpha g(x))), as softmax weights
    return _sgd(alpha * (x - g)) + _sgd(alpha * (g - x)) * dg


@njit(cache=True)
def eval_kernel(kind, beta, x):
    if kind == _SIGMOID:
        return _sgd(beta * x)
    if kind == _TANH1P:
        return _tau(beta * x)
    if kind == _SWISH:
        return x * _sgd(beta * x)
    if kind == _SWISHTAU:
        return x * _tau(beta * x)
    if kind == _LEAKYRELU:
        return max(0.0, beta * x)
    if kind == _RELU:
        return max(0.0, x)
    if kind == _MAXSGD:
        return max(x, _sgd(beta * x))
    if kind == _MAXTAU:
        return max(x, _tau(beta * x))
    if kind == _COSXX:
        return beta * x - math.cos(x)
    if kind == _SOFTPLUS:
        return _softplus(beta * x)
    return x


@njit(cache=True)
def deriv_kernel(kind, beta, alpha, mode, x):
    # 1 - sgd(z) is taken as sgd(-z) throughout to keep relative accuracy in the tails
    if kind == _SIGMOID:
        return beta * _sgd(beta * x) * _sgd(-beta * x)
    if kind == _TANH1P:
        return beta * _dtau(beta * x)
    if kind == _SWISH:
        z = beta * x
        return _sgd(z) * (1.0 + z * _sgd(-z))
    if kind == _SWISHTAU:
        z = beta * x
        return _tau(z) * (1.0 + 2.0 * z * _sgd(-2.0 * z))
    if kind == _LEAKYRELU:
        return beta if x > 0.0 else 0.0
    if kind == _RELU:
        return 1.0 if x > 0.0 else 0.0
    if kind == _MAXSGD:
        s = _sgd(beta * x)
        ds = beta * s * _sgd(-beta * x)
        if mode == 1 or abs(x - s) < 1e-9:
            return _quasi_max_deriv(x, s, ds, alpha)
        return 1.0 if x > s else ds
    if kind == _MAXTAU:
        tau = _tau(beta * x)
        dtau = beta * _dtau(beta * x)
        if mode == 1 or abs(x - tau) < 1e-9:
            return _quasi_max_deriv(x, tau, dtau, alpha)
        return 1.0 if x > tau else dtau
    if kind == _COSXX:
        return beta + math.sin(x)
    if kind == _SOFTPLUS:
        return beta * _sgd(beta * x)
    return 1.0


# ---------------------------------------------------------------------------
# public API


def _check_input(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ActivationError(f"activation input must be finite, got {x!r}")
    return x


def evaluate(spec: ActivationSpec, x: float) -> float:
    """Value of the activation ``spec`` at ``x``."""
    return eval_kernel(spec.kind.code, spec.beta, _check_input(x))


def derivative(spec: ActivationSpec, x: float) -> float:
    """df/dx of the activation ``spec`` at ``x``.

    ReLU and leaky ReLU return 0 at the kink. For ``maxsgd``/``maxtau`` the
    exact piecewise branch is used unless ``spec.mode`` is ``quasi`` or
    ``x`` lies within :data:`TIE_TOLERANCE` of the crossing, where the smooth
    quasi-max derivative takes over.
    """
    return deriv_kernel(spec.kind.code, spec.beta, spec.alpha, spec.mode.code, _check_input(x))


def quasi_max(a: float, b: float, alpha: float = DEFAULT_ALPHA) -> float:
    """Smooth maximum ``log(exp(alpha*a) + exp(alpha*b)) / alpha``.

    Always within ``[max(a, b), max(a, b) + log(2)/alpha]``.
    """
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ActivationError(f"alpha must be positive, got {alpha!r}")
    return quasi_max_kernel(_check_input(a), _check_input(b), alpha)
