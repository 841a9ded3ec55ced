"""The command-line interface: subcommands, plumbing, and exit codes."""

import json

import pytest

from protorecon.cli import main
from protorecon.corpus import parse_dataset, serialize_dataset
from protorecon.synthetic import generate_family

TINY_PRESET = {
    "embedding_size": 8, "hidden_size": 10, "feedforward_size": 10, "dropout": 0.0,
    "batch_size": 8, "lr": 0.01, "max_epochs": 2, "warmup_epochs": 0, "seed": 0,
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A dataset, a split file, a preset, and trained checkpoints."""
    root = tmp_path_factory.mktemp("cli")
    ds, _ = generate_family(n_sets=30, n_daughters=3, seed=8)
    (root / "data.tsv").write_text(serialize_dataset(ds), encoding="utf-8")
    (root / "preset.json").write_text(json.dumps(TINY_PRESET), encoding="utf-8")
    assert main(["split", "--dataset", str(root / "data.tsv"), "--seed", "0",
                 "--out", str(root / "split.tsv")]) == 0
    common = ["--dataset", str(root / "data.tsv"), "--split", str(root / "split.tsv"),
              "--preset", str(root / "preset.json")]
    assert main(["train-recon", *common, "--out", str(root / "recon.ckpt")]) == 0
    assert main(["train-reflex", *common, "--out", str(root / "reflex.ckpt")]) == 0
    return root


def test_ingest_roundtrip(workdir, tmp_path):
    out = tmp_path / "canon.tsv"
    assert main(["ingest", "--dataset", str(workdir / "data.tsv"),
                 "--out", str(out)]) == 0
    assert parse_dataset(out.read_text()) == parse_dataset((workdir / "data.tsv").read_text())


def test_split_output_shape(workdir):
    lines = (workdir / "split.tsv").read_text().splitlines()
    assert len(lines) == 30
    tags = [ln.split("\t")[1] for ln in lines]
    assert set(tags) <= {"train", "val", "test"}


def test_decode_lists_candidates(workdir, tmp_path):
    out = tmp_path / "cands.tsv"
    assert main(["decode", "--dataset", str(workdir / "data.tsv"),
                 "--checkpoint", str(workdir / "recon.ckpt"),
                 "--beam-size", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "id\trank\tcandidate\tm"
    assert len(lines) > 30  # at least one candidate per set


def test_rerank_writes_per_set_tables(workdir, tmp_path):
    out = tmp_path / "rr"
    assert main(["rerank", "--dataset", str(workdir / "data.tsv"),
                 "--recon-checkpoint", str(workdir / "recon.ckpt"),
                 "--reflex-checkpoint", str(workdir / "reflex.ckpt"),
                 "--beam-size", "3", "--lambda", "1.26",
                 "--out", str(out)]) == 0
    assert (out / "summary.tsv").exists()
    assert (out / "syn1.tsv").exists()
    header = (out / "syn1.tsv").read_text().splitlines()[0]
    assert header.split("\t")[:3] == ["beam_rank", "candidate", "m"]


def test_eval_perfect_predictions(workdir, tmp_path, capsys):
    ds = parse_dataset((workdir / "data.tsv").read_text())
    preds = "\n".join(f"{cs.id}\t{' '.join(cs.protoform)}" for cs in ds.sets) + "\n"
    pred_path = tmp_path / "preds.tsv"
    pred_path.write_text(preds, encoding="utf-8")
    assert main(["eval", "--dataset", str(workdir / "data.tsv"),
                 "--predictions", str(pred_path), "--feature-table", "bundled"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[1].startswith("100.0000\t0.0000\t0.0000\t0.0000\t1.0000")


def test_gridsearch_reports_best(workdir, tmp_path, capsys):
    out = tmp_path / "grid.tsv"
    assert main(["gridsearch", "--dataset", str(workdir / "data.tsv"),
                 "--split", str(workdir / "split.tsv"),
                 "--recon-checkpoint", str(workdir / "recon.ckpt"),
                 "--reflex-checkpoint", str(workdir / "reflex.ckpt"),
                 "--k-range", "2,3", "--lambda-range", "0.5,1.0",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k\tlambda\taccuracy"
    assert len(lines) == 1 + 4 + 1
    assert lines[-1].startswith("# best\t")


def test_compare_and_correlate(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("4\n5\n6\n")
    b.write_text("1\n2\n3\n")
    assert main(["compare", "--a", str(a), "--b", str(b),
                 "--alternative", "greater", "--resamples", "1000"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "p_value\tci_low\tci_high\tsignificant"
    assert float(out[1].split("\t")[0]) == pytest.approx(0.05)
    assert main(["correlate", "--a", str(a), "--b", str(b)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert float(out[1]) == pytest.approx(1.0)


def test_analyze_writes_tables(workdir, tmp_path):
    out = tmp_path / "analysis"
    assert main(["analyze", "--dataset", str(workdir / "data.tsv"),
                 "--recon-checkpoint", str(workdir / "recon.ckpt"),
                 "--reflex-checkpoint", str(workdir / "reflex.ckpt"),
                 "--beam-size", "3", "--feature-table", "bundled",
                 "--out", str(out)]) == 0
    for name in ("behavior.tsv", "similarity.tsv", "error_rates.tsv"):
        assert (out / name).exists(), name
    behavior = (out / "behavior.tsv").read_text()
    assert behavior.splitlines()[0] == "category\tcount\tpercent"


def test_run_subcommand(workdir, tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--dataset", str(workdir / "data.tsv"),
                 "--preset", str(workdir / "preset.json"),
                 "--reflex-preset", str(workdir / "preset.json"),
                 "--seeds", "1", "--beam-size", "3", "--lambda", "1.0",
                 "--out", str(out)]) == 0
    assert (out / "aggregate.tsv").exists()
    assert (out / "seed0" / "predictions.tsv").exists()


def test_exit_code_config_error(workdir):
    # unknown preset name is a configuration problem -> exit 2
    assert main(["train-recon", "--dataset", str(workdir / "data.tsv"),
                 "--preset", "no-such-preset", "--out", "/tmp/x.ckpt"]) == 2


def test_exit_code_data_error(tmp_path):
    # missing dataset file -> exit 3
    assert main(["ingest", "--dataset", str(tmp_path / "missing.tsv")]) == 3
    # malformed dataset -> exit 3
    bad = tmp_path / "bad.tsv"
    bad.write_text("proto\tL\np a\n")
    assert main(["ingest", "--dataset", str(bad)]) == 3


def test_bundled_presets_load():
    from protorecon.cli import load_preset

    for name in ("recon_gru_bs_wikihan", "reflex_gru_wikihan"):
        preset = load_preset(name)
        assert "hidden_size" in preset and "lr" in preset
