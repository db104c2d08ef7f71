"""Benchmark protocol: beta grid search over repeated seeded runs and ReLU-relative ratio reports."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .activation import ActivationError, ActivationKind, ActivationSpec, _kind_from_name, DEFAULT_ALPHA
from .core import ConfigurationError, GlvqError, GlvqModel, Projection
from .data import DataError, Dataset, split
from .trainer import TrainConfig, init_prototypes, train

__all__ = [
    "DEFAULT_GRID",
    "TABLE_ACTIVATIONS",
    "ActivationConfig",
    "ExperimentSpec",
    "RunOutcome",
    "BetaSummary",
    "GridResult",
    "ReportRow",
    "RatioReport",
    "BenchError",
    "accuracy",
    "run_seed",
    "grid_search",
    "ratio_report",
    "combine_reports",
    "parse_activation_list",
    "run_benchmark",
]

DEFAULT_GRID = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)

# the row set of the ReLU-relative comparison table
TABLE_ACTIVATIONS = (
    "relu,sigmoid:grid,sigmoid:1,tanh1p:grid,swish:grid,swishtau:grid,leakyrelu:grid,"
    "maxsgd:grid,maxtau:grid,cosxx:grid,softplus:grid,identity"
)

CSV_COLUMNS = (
    "activation",
    "best_beta",
    "mean_accuracy",
    "accuracy_ratio",
    "accuracy_std",
    "mean_convergence_epochs",
    "convergence_ratio",
    "convergence_std",
    "converged_fraction",
)


class BenchError(GlvqError):
    pass


def accuracy(model: GlvqModel, dataset: Dataset) -> float:
    """Fraction of samples whose nearest prototype carries their label."""
    if len(dataset) == 0:
        raise DataError("accuracy of an empty dataset")
    Z = model.projection.apply(dataset.X)
    W = model.prototypes.vectors
    d = np.einsum("ijk,ijk->ij", Z[:, None, :] - W[None], Z[:, None, :] - W[None])
    pred = model.prototypes.labels[np.argmin(d, axis=1)]
    return float(np.mean(pred == dataset.y))


@dataclass(frozen=True)
class ActivationConfig:
    """One report row: an activation kind with a beta grid (a single beta when fixed)."""

    kind: ActivationKind
    betas: tuple[float, ...]
    alpha: float = DEFAULT_ALPHA
    fixed: bool = False

    @property
    def label(self) -> str:
        if not self.kind.uses_beta:
            return self.kind.value
        if self.fixed:
            return f"{self.kind.value}:{self.betas[0]:g}"
        return self.kind.value

    def spec(self, beta: float) -> ActivationSpec:
        return ActivationSpec(self.kind, beta, self.alpha)


def parse_activation_list(text: str, grid: Sequence[float] = DEFAULT_GRID) -> list[ActivationConfig]:
    """Parse ``kind[:beta|:grid]`` tokens; ``all`` expands to the full table row set."""
    if text.strip() == "all":
        text = TABLE_ACTIVATIONS
    configs = []
    for token in filter(None, (t.strip() for t in text.split(","))):
        parts = token.split(":")
        kind = _kind_from_name(parts[0])
        alpha = float(parts[2]) if len(parts) > 2 else DEFAULT_ALPHA
        if len(parts) > 3:
            raise ActivationError(f"malformed activation token {token!r}")
        if not kind.uses_beta:
            cfg = ActivationConfig(kind, (1.0,), fixed=True)
        elif len(parts) > 1 and parts[1] == "grid":
            cfg = ActivationConfig(kind, tuple(float(b) for b in grid), alpha)
        else:
            try:
                beta = float(parts[1]) if len(parts) > 1 else 1.0
            except ValueError:
                raise ActivationError(f"malformed activation token {token!r}") from None
            cfg = ActivationConfig(kind, (beta,), alpha, fixed=True)
        for b in cfg.betas:
            cfg.spec(b)  # validates beta for this kind
        if any(c.label == cfg.label for c in configs):
            raise ActivationError(f"duplicate activation {cfg.label!r}")
        configs.append(cfg)
    if not configs:
        raise ActivationError("no activations given")
    return configs


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str
    activation: ActivationConfig
    runs: int = 100
    train_config: TrainConfig = TrainConfig()
    test_fraction: float = 0.2
    gamma: float = 0.0
    master_seed: int = 0

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if not self.activation.betas:
            raise ConfigurationError("beta grid is empty")


@dataclass(frozen=True)
class RunOutcome:
    run: int
    seed: int
    beta: float
    test_accuracy: float
    convergence_epoch: int
    converged: bool


@dataclass
class BetaSummary:
    beta: float
    outcomes: list[RunOutcome]

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([o.test_accuracy for o in self.outcomes])

    @property
    def epochs(self) -> np.ndarray:
        return np.array([o.convergence_epoch for o in self.outcomes], dtype=float)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def mean_epochs(self) -> float:
        return float(np.mean(self.epochs))

    @property
    def converged_fraction(self) -> float:
        return float(np.mean([o.converged for o in self.outcomes]))


@dataclass
class GridResult:
    label: str
    kind: ActivationKind
    best_beta: float
    per_beta: list[BetaSummary]

    @property
    def best(self) -> BetaSummary:
        return next(s for s in self.per_beta if s.beta == self.best_beta)


def run_seed(master_seed: int, run: int) -> int:
    """64-bit seed of one run; shared by every activation and beta (common random numbers)."""
    state = np.random.SeedSequence([int(master_seed), int(run)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _run_cell(args) -> RunOutcome:
    train_set, test_set, act, beta, run, seed, cfg, gamma = args
    try:
        rng = np.random.default_rng(seed)
        protos = init_prototypes(train_set, cfg.prototypes_per_class, cfg.init_strategy, cfg.jitter_scale, rng)
        model = GlvqModel(protos, act.spec(beta), Projection(), gamma)
        result = train(train_set, model, replace(cfg, seed=seed))
    except GlvqError as exc:
        raise BenchError(f"beta={beta:g} run={run}: {exc}") from None
    epochs = result.convergence_epoch if result.converged else cfg.max_epochs
    return RunOutcome(run, seed, beta, accuracy(result.model, test_set), epochs, result.converged)


def _map(fn, items: list, parallel: int) -> list:
    if parallel <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * parallel))))


def _cells(spec: ExperimentSpec, dataset: Dataset) -> list[tuple]:
    train_set, test_set = split(dataset, spec.test_fraction, spec.master_seed)
    return [
        (train_set, test_set, spec.activation, beta, run, run_seed(spec.master_seed, run), spec.train_config, spec.gamma)
        for beta in spec.activation.betas
        for run in range(spec.runs)
    ]


def _summarize(spec: ExperimentSpec, outcomes: list[RunOutcome]) -> GridResult:
    outcomes = sorted(outcomes, key=lambda o: (o.beta, o.seed, o.run))
    per_beta = [
        BetaSummary(beta, sorted((o for o in outcomes if o.beta == beta), key=lambda o: o.run))
        for beta in sorted(set(spec.activation.betas))
    ]
    best = min(per_beta, key=lambda s: (-s.mean_accuracy, s.mean_epochs, s.beta))
    return GridResult(spec.activation.label, spec.activation.kind, best.beta, per_beta)


def _execute(specs: list[tuple[ExperimentSpec, Dataset]], parallel: int) -> list[GridResult]:
    cells, owners = [], []
    for i, (spec, ds) in enumerate(specs):
        new = _cells(spec, ds)
        cells.extend(new)
        owners.extend([i] * len(new))
    outcomes = _map(_run_cell, cells, parallel)
    return [
        _summarize(spec, [o for o, k in zip(outcomes, owners) if k == i]) for i, (spec, _) in enumerate(specs)
    ]


def grid_search(spec: ExperimentSpec, dataset: Dataset, parallel: int = 1) -> GridResult:
    """Run every (beta, run) cell and pick the beta with the best mean test accuracy.

    Ties go to fewer mean convergence epochs, then to the smaller beta.
    """
    try:
        return _execute([(spec, dataset)], parallel)[0]
    except BenchError as exc:
        raise BenchError(f"{spec.activation.label} on {spec.dataset}: {exc}") from None


# ---------------------------------------------------------------------------
# reports


@dataclass
class ReportRow:
    activation: str
    best_beta: float | None
    mean_accuracy: float
    accuracy_ratio: float
    accuracy_std: float
    mean_convergence_epochs: float
    convergence_ratio: float
    convergence_std: float
    converged_fraction: float


@dataclass
class RatioReport:
    rows: list[ReportRow]
    metadata: dict = field(default_factory=dict)

    def row(self, activation: str) -> ReportRow:
        for r in self.rows:
            if r.activation == activation:
                return r
        raise KeyError(activation)

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> RatioReport:
        return cls([ReportRow(**r) for r in d["rows"]], dict(d.get("metadata", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RatioReport:
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_markdown(self) -> str:
        header = "| " + " | ".join(CSV_COLUMNS) + " |"
        rule = "|" + "|".join(":---" if i == 0 else "---:" for i in range(len(CSV_COLUMNS))) + "|"
        lines = [header, rule]
        for r in self.rows:
            cells = []
            for c in CSV_COLUMNS:
                v = getattr(r, c)
                cells.append(v if isinstance(v, str) else ("" if v is None else f"{v:.9f}"))
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "md":
            return self.to_markdown()
        raise ConfigurationError(f"unknown report format {fmt!r}")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _std(values: np.ndarray) -> float:
    return float(np.std(values)) if values.size > 1 else 0.0


def ratio_report(results: Sequence[GridResult], metadata: dict | None = None) -> RatioReport:
    """Ratios of each row's best-beta means to the ReLU row.

    Ratio stds are over runs, pairing run ``r`` of a row with run ``r`` of ReLU.
    """
    ref = next((g for g in results if g.kind is ActivationKind.RELU), None)
    if ref is None:
        raise BenchError("ratio report needs a relu reference row")
    ref_best = ref.best
    ref_acc = ref_best.mean_accuracy
    if ref_acc == 0:
        raise BenchError("relu reference accuracy is zero")
    ref_ep = ref_best.mean_epochs
    rows = []
    for g in results:
        best = g.best
        if len(best.outcomes) != len(ref_best.outcomes):
            raise BenchError(f"{g.label}: run count differs from the relu reference")
        with np.errstate(divide="ignore", invalid="ignore"):
            acc_pairs = best.accuracies / ref_best.accuracies
        ep_pairs = best.epochs / ref_best.epochs
        rows.append(
            ReportRow(
                activation=g.label,
                best_beta=best.beta if g.kind.uses_beta else None,
                mean_accuracy=best.mean_accuracy,
                accuracy_ratio=best.mean_accuracy / ref_acc,
                accuracy_std=_std(acc_pairs) if np.all(np.isfinite(acc_pairs)) else math.nan,
                mean_convergence_epochs=best.mean_epochs,
                convergence_ratio=best.mean_epochs / ref_ep,
                convergence_std=_std(ep_pairs),
                converged_fraction=best.converged_fraction,
            )
        )
    meta = {"std_over": "runs (paired by run index with the relu reference)"}
    meta.update(metadata or {})
    return RatioReport(rows, meta)


def combine_reports(reports: Sequence[RatioReport], names: Sequence[str]) -> RatioReport:
    """Average per-dataset ratios; stds are then over datasets."""
    if not reports:
        raise BenchError("nothing to combine")
    labels = [r.activation for r in reports[0].rows]
    rows = []
    for label in labels:
        per = [rep.row(label) for rep in reports]
        acc = np.array([r.accuracy_ratio for r in per])
        conv = np.array([r.convergence_ratio for r in per])
        betas = [r.best_beta for r in per]
        rows.append(
            ReportRow(
                activation=label,
                best_beta=betas[0] if len(set(betas)) == 1 else None,
                mean_accuracy=float(np.mean([r.mean_accuracy for r in per])),
                accuracy_ratio=float(np.mean(acc)),
                accuracy_std=_std(acc),
                mean_convergence_epochs=float(np.mean([r.mean_convergence_epochs for r in per])),
                convergence_ratio=float(np.mean(conv)),
                convergence_std=_std(conv),
                converged_fraction=float(np.mean([r.converged_fraction for r in per])),
            )
        )
    meta = dict(reports[0].metadata)
    meta.update({"datasets": list(names), "std_over": "datasets"})
    meta["per_dataset_best_beta"] = {
        label: {n: rep.row(label).best_beta for n, rep in zip(names, reports)} for label in labels
    }
    return RatioReport(rows, meta)


def run_benchmark(
    datasets: dict[str, Dataset],
    activations: Sequence[ActivationConfig],
    runs: int,
    train_config: TrainConfig,
    master_seed: int = 0,
    test_fraction: float = 0.2,
    gamma: float = 0.0,
    parallel: int = 1,
) -> tuple[RatioReport, dict[str, list[GridResult]]]:
    """Grid-search every activation on every dataset and build the ratio report.

    With several datasets the returned report averages the per-dataset ratios.
    """
    if not any(a.kind is ActivationKind.RELU for a in activations):
        raise ConfigurationError("activation list must include relu as the reference")
    meta = {
        "runs": runs,
        "master_seed": master_seed,
        "test_fraction": test_fraction,
        "accuracy": "test accuracy on a stratified split fixed by master_seed",
        "gamma": gamma,
        "learning_rate": train_config.learning_rate,
        "max_epochs": train_config.max_epochs,
        "convergence_epsilon": train_config.convergence_epsilon,
        "convergence_window": train_config.convergence_window,
        "convergence_measure": train_config.convergence_measure.value,
        "prototypes_per_class": train_config.prototypes_per_class,
        "unconverged_epochs": "counted as max_epochs",
    }
    specs = [
        (ExperimentSpec(name, act, runs, train_config, test_fraction, gamma, master_seed), ds)
        for name, ds in datasets.items()
        for act in activations
    ]
    flat = iter(_execute(specs, parallel))
    reports, grids = [], {}
    for name, ds in datasets.items():
        grids[name] = [next(flat) for _ in activations]
        reports.append(
            ratio_report(grids[name], dict(meta, dataset=name, n_samples=len(ds), dim=ds.dim, n_classes=ds.n_classes))
        )
    if len(reports) == 1:
        return reports[0], grids
    return combine_reports(reports, list(datasets)), grids
