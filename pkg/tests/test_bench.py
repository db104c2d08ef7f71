import csv
import io
import json
import random

import pytest

from glvq_act.activation import ActivationError, ActivationKind, parse_activation
from glvq_act.bench import (
    CSV_COLUMNS,
    ActivationConfig,
    BenchError,
    BetaSummary,
    ExperimentSpec,
    GridResult,
    RatioReport,
    RunOutcome,
    accuracy,
    combine_reports,
    grid_search,
    parse_activation_list,
    ratio_report,
    run_benchmark,
    run_seed,
)
from glvq_act.core import ConfigurationError, GlvqModel, PrototypeSet
from glvq_act.data import BlobSpec, Dataset, synth_blobs
from glvq_act.trainer import TrainConfig

FAST = TrainConfig(learning_rate=0.05, max_epochs=300)


def blobs(seed=0):
    return synth_blobs(BlobSpec(), seed)


def grid(kind, accs_by_beta, epochs_by_beta=None, label=None):
    """Hand-built grid result: {beta: [acc per run]}."""
    kind = ActivationKind(kind)
    per = []
    for beta, accs in accs_by_beta.items():
        eps = (epochs_by_beta or {}).get(beta, [100] * len(accs))
        per.append(BetaSummary(beta, [RunOutcome(r, r, beta, a, e, True) for r, (a, e) in enumerate(zip(accs, eps))]))
    best = min(per, key=lambda s: (-s.mean_accuracy, s.mean_epochs, s.beta))
    return GridResult(label or kind.value, kind, best.beta, per)


class TestAccuracy:
    def model(self):
        return GlvqModel(PrototypeSet([[0.0, 0.0], [6.0, 0.0]], [0, 1]), parse_activation("relu"))

    def test_perfect(self):
        ds = synth_blobs(BlobSpec(noise_std=0.0, samples_per_class=5), 0)
        assert accuracy(self.model(), ds) == 1.0

    def test_inverted_labels(self):
        ds = synth_blobs(BlobSpec(noise_std=0.0, samples_per_class=5), 0)
        flipped = Dataset(ds.X, 1 - ds.y, ds.class_names)
        assert accuracy(self.model(), flipped) == 0.0

    def test_three_of_four(self):
        ds = Dataset([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0], [2.0, 0.0]], [0, 0, 1, 1], ["a", "b"])
        assert accuracy(self.model(), ds) == 0.75


class TestParse:
    def test_forms(self):
        cfgs = parse_activation_list("relu,sgd:grid,sgd:1,soft+:2.5,id", grid=(1, 2))
        assert [c.label for c in cfgs] == ["relu", "sigmoid", "sigmoid:1", "softplus:2.5", "identity"]
        assert cfgs[1].betas == (1.0, 2.0) and not cfgs[1].fixed
        assert cfgs[3].betas == (2.5,) and cfgs[3].fixed

    def test_bare_kind_is_beta_one(self):
        assert parse_activation_list("swish")[0].betas == (1.0,)

    def test_all(self):
        labels = [c.label for c in parse_activation_list("all")]
        assert labels[0] == "relu" and "sigmoid:1" in labels and "identity" in labels
        assert len(labels) == 12

    def test_alpha(self):
        assert parse_activation_list("maxsgd:grid:50")[0].alpha == 50.0

    @pytest.mark.parametrize("text", ["", "nope", "swish:-1", "swish:x", "relu,relu", "maxsgd:1:2:3"])
    def test_invalid(self, text):
        with pytest.raises(ActivationError):
            parse_activation_list(text)


class TestSeeds:
    def test_stable_and_distinct(self):
        assert run_seed(0, 0) == run_seed(0, 0)
        assert len({run_seed(m, r) for m in range(5) for r in range(50)}) == 250
        assert 0 <= run_seed(3, 9) < 2**64


class TestGridSearch:
    def test_single_beta(self):
        act = ActivationConfig(ActivationKind.SWISH, (2.0,))
        g = grid_search(ExperimentSpec("b", act, 2, FAST), blobs())
        assert g.best_beta == 2.0 and len(g.best.outcomes) == 2

    def test_deterministic(self):
        act = ActivationConfig(ActivationKind.SIGMOID, (1.0, 5.0))
        spec = ExperimentSpec("b", act, 1, FAST, master_seed=4)
        assert grid_search(spec, blobs()) == grid_search(spec, blobs())

    def test_pathological_beta_loses(self):
        act = ActivationConfig(ActivationKind.SOFTPLUS, (1.0, 1000.0))
        g = grid_search(ExperimentSpec("b", act, 5, TrainConfig(learning_rate=0.5, max_epochs=300)), blobs())
        acc = {s.beta: s.mean_accuracy for s in g.per_beta}
        assert acc[1.0] == 1.0 and acc[1000.0] < 1.0
        assert g.best_beta == 1.0

    def test_accuracy_tie_broken_by_epochs(self):
        act = ActivationConfig(ActivationKind.SIGMOID, (1.0, 200.0))
        g = grid_search(ExperimentSpec("b", act, 5, FAST), blobs())
        s1, s2 = g.per_beta
        assert s1.mean_accuracy == s2.mean_accuracy == 1.0
        assert s2.mean_epochs < s1.mean_epochs
        assert g.best_beta == 200.0

    def test_full_tie_prefers_smaller_beta(self):
        g = grid(ActivationKind.SWISH, {5.0: [0.9], 2.0: [0.9]})
        assert g.best_beta == 2.0

    def test_common_seeds_across_betas(self):
        act = ActivationConfig(ActivationKind.SWISH, (1.0, 2.0))
        g = grid_search(ExperimentSpec("b", act, 3, FAST), blobs())
        assert [o.seed for o in g.per_beta[0].outcomes] == [o.seed for o in g.per_beta[1].outcomes]

    def test_monotone_in_grid(self):
        ds = synth_blobs(BlobSpec(noise_std=2.5), 1)
        best = []
        betas = (0.5, 2.0, 10.0)
        for k in range(1, len(betas) + 1):
            act = ActivationConfig(ActivationKind.SIGMOID, betas[:k])
            best.append(grid_search(ExperimentSpec("b", act, 3, FAST), ds).best.mean_accuracy)
        assert best == sorted(best)

    def test_error_context(self):
        bad = Dataset([[0.0], [1.0], [2.0], [3.0]], [0, 0, 0, 0], ["a", "b"])
        act = ActivationConfig(ActivationKind.SWISH, (2.0,))
        with pytest.raises(BenchError, match=r"swish on bad: beta=2 run=0"):
            grid_search(ExperimentSpec("bad", act, 1, FAST, test_fraction=0.5), bad)

    def test_invalid_spec(self):
        with pytest.raises(ConfigurationError):
            ExperimentSpec("b", ActivationConfig(ActivationKind.SWISH, (1.0,)), runs=0)
        with pytest.raises(ConfigurationError):
            ExperimentSpec("b", ActivationConfig(ActivationKind.SWISH, ()))


class TestRatioReport:
    def results(self):
        return [
            grid("relu", {1.0: [0.8, 0.8]}, {1.0: [100, 300]}),
            grid("softplus", {2.0: [0.9, 0.9]}, {2.0: [50, 150]}),
        ]

    def test_relu_row(self):
        rel = ratio_report(self.results()).row("relu")
        assert (rel.accuracy_ratio, rel.convergence_ratio, rel.accuracy_std, rel.convergence_std) == (1.0, 1.0, 0.0, 0.0)
        assert rel.best_beta is None

    def test_division(self):
        row = ratio_report(self.results()).row("softplus")
        assert row.accuracy_ratio == pytest.approx(1.125, abs=1e-15)
        assert row.convergence_ratio == 0.5
        assert row.best_beta == 2.0

    def test_paired_std(self):
        res = [grid("relu", {1.0: [0.5, 1.0]}), grid("swish", {1.0: [0.5, 0.5]})]
        # pairs: 1.0 and 0.5
        assert ratio_report(res).row("swish").accuracy_std == pytest.approx(0.25)

    def test_missing_relu(self):
        with pytest.raises(BenchError):
            ratio_report(self.results()[1:])

    def test_zero_reference(self):
        with pytest.raises(BenchError):
            ratio_report([grid("relu", {1.0: [0.0]})])

    def test_unconverged_counts_max_epochs(self):
        ds = synth_blobs(BlobSpec(noise_std=2.0), 0)
        cfg = TrainConfig(learning_rate=0.05, max_epochs=7)
        rep, grids = run_benchmark({"b": ds}, parse_activation_list("relu,identity"), 2, cfg)
        for g in grids["b"]:
            for o in g.best.outcomes:
                assert o.converged or o.convergence_epoch == 7

    def test_permutation_invariant(self):
        # completion order of cells must not matter
        from glvq_act.bench import _summarize

        spec = ExperimentSpec("b", ActivationConfig(ActivationKind.SWISH, (1.0, 2.0)), 3, FAST)
        flat = [o for s in grid_search(spec, blobs()).per_beta for o in s.outcomes]
        assert _summarize(spec, flat) == _summarize(spec, random.Random(5).sample(flat, len(flat)))

    def test_json_round_trip(self):
        rep = ratio_report(self.results(), {"note": "x"})
        assert RatioReport.from_json(rep.to_json()) == rep

    def test_renderings_agree(self):
        rep = ratio_report(self.results())
        csv_rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
        js = json.loads(rep.to_json())["rows"]
        md = [[c.strip() for c in line.strip("|").split("|")] for line in rep.to_markdown().splitlines()[2:]]
        for r, c, j, m in zip(rep.rows, csv_rows, js, md):
            for k, col in enumerate(CSV_COLUMNS[1:], start=1):
                v = getattr(r, col)
                if v is None:
                    assert c[col] == "" and j[col] is None and m[k] == ""
                    continue
                assert round(float(c[col]), 9) == round(j[col], 9) == round(float(m[k]), 9) == round(v, 9)

    def test_csv_columns(self):
        header = ratio_report(self.results()).to_csv().splitlines()[0]
        assert header.split(",") == list(CSV_COLUMNS)


class TestCombine:
    def test_average_over_datasets(self):
        r1 = ratio_report([grid("relu", {1.0: [0.8]}), grid("swish", {1.0: [0.8]}, {1.0: [50]})])
        r2 = ratio_report([grid("relu", {1.0: [0.5]}), grid("swish", {2.0: [0.6]}, {2.0: [200]})])
        comb = combine_reports([r1, r2], ["a", "b"])
        sw = comb.row("swish")
        assert sw.accuracy_ratio == pytest.approx(1.1)
        assert sw.accuracy_std == pytest.approx(0.1)
        assert sw.convergence_ratio == pytest.approx(1.25)
        assert sw.best_beta is None
        assert comb.metadata["per_dataset_best_beta"]["swish"] == {"a": 1.0, "b": 2.0}
        rel = comb.row("relu")
        assert (rel.accuracy_ratio, rel.convergence_ratio, rel.accuracy_std, rel.convergence_std) == (1.0, 1.0, 0.0, 0.0)


class TestRunBenchmark:
    def test_requires_relu(self):
        with pytest.raises(ConfigurationError):
            run_benchmark({"b": blobs()}, parse_activation_list("swish"), 1, FAST)

    def test_metadata_and_rows(self):
        rep, grids = run_benchmark({"b": blobs()}, parse_activation_list("relu,swish:grid", (1, 2)), 2, FAST)
        assert [r.activation for r in rep.rows] == ["relu", "swish"]
        assert rep.metadata["runs"] == 2 and rep.metadata["dataset"] == "b"
        assert rep.metadata["learning_rate"] == 0.05
        assert len(grids["b"][1].per_beta) == 2

    def test_parallel_matches_serial(self):
        acts = parse_activation_list("relu,swish:grid", (1, 5))
        a, _ = run_benchmark({"b": blobs()}, acts, 3, FAST, parallel=1)
        b, _ = run_benchmark({"b": blobs()}, acts, 3, FAST, parallel=2)
        assert a.to_json() == b.to_json()

    def test_two_datasets(self):
        rep, grids = run_benchmark({"b0": blobs(0), "b1": blobs(1)}, parse_activation_list("relu,id"), 1, FAST)
        assert rep.metadata["datasets"] == ["b0", "b1"]
        assert set(grids) == {"b0", "b1"}
