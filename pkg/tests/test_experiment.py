"""Grid search, result averaging, and the seeded experiment runner."""

import dataclasses
import os

import pytest

from protorecon import models
from protorecon.corpus import build_vocabulary, serialize_dataset, split_dataset
from protorecon.errors import ConfigError
from protorecon.experiment import (
    DEFAULT_K_RANGE,
    DEFAULT_LAMBDA_RANGE,
    ExperimentConfig,
    GridResult,
    average_grid_results,
    grid_search,
    run_experiment,
)
from protorecon.synthetic import generate_family
from tests.conftest import tiny_recon_config, tiny_reflex_config


def test_default_grid_ranges():
    assert DEFAULT_K_RANGE == (2, 4, 6, 8, 10)
    assert len(DEFAULT_LAMBDA_RANGE) == 14
    assert DEFAULT_LAMBDA_RANGE[0] == pytest.approx(0.3)
    assert DEFAULT_LAMBDA_RANGE[-1] == pytest.approx(4.2)
    steps = [b - a for a, b in zip(DEFAULT_LAMBDA_RANGE, DEFAULT_LAMBDA_RANGE[1:])]
    assert all(s == pytest.approx(0.3) for s in steps)


def test_average_grid_results_rounds_k_half_up():
    results = [GridResult(k=6, lam=1.2, grid={}), GridResult(k=7, lam=1.4, grid={})]
    k, lam = average_grid_results(results)
    assert k == 7  # 6.5 rounds up, not to even
    assert lam == pytest.approx(1.3)


def test_average_grid_results_plain_mean():
    results = [GridResult(k=2, lam=0.3, grid={}), GridResult(k=4, lam=0.9, grid={})]
    assert average_grid_results(results) == (3, pytest.approx(0.6))


def test_grid_search_tie_break_and_coverage(tiny_split):
    vocab = build_vocabulary(tiny_split)
    recon = models.train(models.ReconModel(tiny_recon_config(), vocab), tiny_split)
    reflex = models.train(models.ReflexModel(tiny_reflex_config(), vocab), tiny_split)
    result = grid_search(
        recon, reflex, tiny_split.subset("val"),
        k_range=(2, 3), lambda_range=(0.5, 1.0),
    )
    assert set(result.grid) == {(2, 0.5), (2, 1.0), (3, 0.5), (3, 1.0)}
    # an untrained tiny model gets uniform accuracy: ties resolve to the
    # smallest k, then the smallest lambda
    best_acc = result.grid[(result.k, result.lam)]
    ties = [(k, lam) for (k, lam), acc in result.grid.items() if acc == best_acc]
    assert (result.k, result.lam) == min(ties)


def test_experiment_config_hash_sensitivity():
    a = ExperimentConfig(dataset_path="d.tsv", out_dir="o")
    b = ExperimentConfig(dataset_path="d.tsv", out_dir="o")
    assert a.config_hash() == b.config_hash()
    c = ExperimentConfig(dataset_path="d.tsv", out_dir="o", lam=2.0)
    assert a.config_hash() != c.config_hash()


def test_experiment_config_rejects_duplicate_seeds():
    with pytest.raises(ConfigError):
        ExperimentConfig(dataset_path="d", out_dir="o", seeds=(1, 1))


@pytest.fixture(scope="module")
def small_family(tmp_path_factory):
    root = tmp_path_factory.mktemp("family")
    ds, _ = generate_family(n_sets=40, n_daughters=3, seed=5)
    path = root / "family.tsv"
    path.write_text(serialize_dataset(ds), encoding="utf-8")
    return path


def _small_config(dataset_path, out_dir, **overrides):
    base = dict(
        dataset_path=str(dataset_path),
        out_dir=str(out_dir),
        recon_config=tiny_recon_config(max_epochs=2),
        reflex_config=tiny_reflex_config(max_epochs=2),
        seeds=(0,),
        beam_size=3,
        lam=1.0,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_run_experiment_artifacts(small_family, tmp_path):
    out = tmp_path / "run"
    config = _small_config(small_family, out)
    results, failures = run_experiment(config)
    assert failures == {}
    assert set(results) == {0}
    for name in ("aggregate.tsv",):
        assert (out / name).exists()
    seed_dir = out / "seed0"
    for name in ("recon.ckpt", "reflex.ckpt", "predictions.tsv", "metrics.tsv",
                 "metrics_beam_only.tsv", "behavior.tsv", "error_rates.tsv"):
        assert (seed_dir / name).exists(), name
    stamp = (seed_dir / "predictions.tsv").read_text().splitlines()[0]
    assert stamp.startswith("# config=") and "seed=0" in stamp


def test_run_experiment_byte_identical_reruns(small_family, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        run_experiment(_small_config(small_family, out))
        outs.append(out)
    for rel in ("aggregate.tsv", "seed0/predictions.tsv", "seed0/metrics.tsv",
                "seed0/recon.ckpt", "seed0/reflex.ckpt", "seed0/behavior.tsv"):
        a = (outs[0] / rel).read_bytes()
        b = (outs[1] / rel).read_bytes()
        assert a == b, f"{rel} differs between identical runs"


def test_run_experiment_no_reranker_matches_beam(small_family, tmp_path):
    """The no-reranker ablation reports the beam top-1 as the reranked output."""
    out = tmp_path / "abl"
    config = _small_config(small_family, out, ablation_no_reranker=True)
    results, _ = run_experiment(config)
    assert results[0]["ACC"] == results[0]["beam_ACC"]
    for line in (out / "seed0" / "predictions.tsv").read_text().splitlines()[2:]:
        cells = line.split("\t")
        assert cells[2] == cells[3]  # beam_top == reranked_top


def test_run_experiment_multiple_seeds_aggregate(small_family, tmp_path):
    out = tmp_path / "multi"
    config = _small_config(small_family, out, seeds=(0, 1))
    results, _ = run_experiment(config)
    assert set(results) == {0, 1}
    lines = (out / "aggregate.tsv").read_text().splitlines()
    assert lines[1].split("\t")[0] == "seed"
    assert lines[-2].split("\t")[0] == "mean"
    assert lines[-1].split("\t")[0] == "std"
