from __future__ import annotations

import csv
import json

import pytest

from src.cli import main
from src.parsers import dump_train_config, load_dataset, load_manifest, write_dataset
from tests.helpers import make_kg, make_store, small_config


def _synth(out, seed=1):
    code = main(["synth", "--entities", "40", "--relations", "4", "--triples", "160", "--seed", str(seed),
                 "--out", str(out)])
    assert code == 0
    return out / "manifest.yaml"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    return _synth(tmp_path_factory.mktemp("data"))


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    return dump_train_config(small_config(), tmp_path_factory.mktemp("config") / "train.yaml")


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, dataset, config_path):
    out = tmp_path_factory.mktemp("runs") / "run"
    assert main(["--threads", "1", "train", "--manifest", str(dataset), "--config", str(config_path),
                 "--out", str(out)]) == 0
    return out


def _report_labels(path):
    with open(path, encoding="utf-8") as f:
        return [row["row"] for row in csv.DictReader(f, delimiter="\t")]


# ---------------------------------------------------------------- 退出码

@pytest.mark.parametrize("argv", [
    [],
    ["train"],
    ["--threads", "0", "synth", "--out", "x"],
    ["synth", "--removal-mode", "edges", "--out", "x"],
    ["evaluate", "--run", "x", "--stage", "stage3"],
])
def test_usage_errors_exit_1(argv):
    assert main(argv) == 1


def test_missing_manifest_exit_1(tmp_path):
    assert main(["train", "--manifest", str(tmp_path / "absent.yaml"), "--out", str(tmp_path / "out")]) == 1


def test_malformed_triples_exit_2(tmp_path):
    manifest = _synth(tmp_path / "data")
    with open(tmp_path / "data" / "kg0" / "train.tsv", "a", encoding="utf-8") as f:
        f.write("only\ttwo_fields\n")
    assert main(["train", "--manifest", str(manifest), "--out", str(tmp_path / "out")]) == 2


def test_invalid_utf8_triples_exit_2(tmp_path):
    manifest = _synth(tmp_path / "data")
    with open(tmp_path / "data" / "kg0" / "train.tsv", "ab") as f:
        f.write(b"\xff\xfe\tr0\te1\n")
    assert main(["diagnose", "--manifest", str(manifest)]) == 2
    assert main(["train", "--manifest", str(manifest), "--out", str(tmp_path / "out")]) == 2


# ---------------------------------------------------------------- train / evaluate

def test_train_writes_run_directory(run_dir):
    for name in ("config.yaml", "manifest.yaml", "metrics.tsv", "report.tsv", "report.json"):
        assert (run_dir / name).is_file(), name
    for stage in ("stage1", "stage2"):
        for model in ("kg0", "kg1", "fused"):
            assert (run_dir / "checkpoints" / stage / f"{model}.ckpt").is_file()
    assert _report_labels(run_dir / "report.tsv") == [
        label for label in ("KGC-I", "KGC-A", "KGC-I-D", "KGC-A-D", "CKGC-CKD") for _ in range(3)
    ]
    doc = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    assert set(doc["CKGC-CKD"]["per_kg"]) == {"kg0", "kg1"}


def test_evaluate_is_repeatable(run_dir, tmp_path):
    for name in ("a", "b"):
        assert main(["evaluate", "--run", str(run_dir), "--out", str(tmp_path / name)]) == 0
    for name in ("report.tsv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_evaluate_single_row_with_overrides(run_dir, tmp_path):
    out = tmp_path / "ind"
    assert main(["evaluate", "--run", str(run_dir), "--stage", "stage1", "--model", "individual",
                 "--filter", "raw", "--tasks", "head,tail", "--dump-ranks", "--out", str(out)]) == 0
    with open(out / "report.tsv", encoding="utf-8") as f:
        rows = list(csv.DictReader(f, delimiter="\t"))
    assert {row["row"] for row in rows} == {"KGC-I"}
    assert {row["filter"] for row in rows} == {"raw"}
    assert {row["tasks"] for row in rows} == {"head,tail"}
    assert (out / "ranks.tsv").is_file()


def test_evaluate_rejects_unknown_task(run_dir, tmp_path):
    assert main(["evaluate", "--run", str(run_dir), "--tasks", "relation", "--out", str(tmp_path)]) == 1


def test_evaluate_detects_vocabulary_change(run_dir, tmp_path):
    store = load_dataset(load_manifest(run_dir / "manifest.yaml"))
    store.kgs[0].entity_names[0] = "renamed"
    manifest = write_dataset(store, tmp_path / "renamed")
    assert main(["evaluate", "--run", str(run_dir), "--manifest", str(manifest),
                 "--out", str(tmp_path / "out")]) == 2


def test_stage1_only(dataset, config_path, tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--manifest", str(dataset), "--config", str(config_path), "--out", str(out),
                 "--stage1-only"]) == 0
    assert not (out / "checkpoints" / "stage2").exists()
    with open(out / "metrics.tsv", encoding="utf-8") as f:
        rows = list(csv.DictReader(f, delimiter="\t"))
    assert rows and all(row["loss_D"] == "NA" for row in rows)
    assert set(_report_labels(out / "report.tsv")) == {"KGC-I", "KGC-A"}


def test_training_is_byte_identical(dataset, config_path, run_dir, tmp_path):
    out = tmp_path / "again"
    assert main(["--threads", "1", "train", "--manifest", str(dataset), "--config", str(config_path),
                 "--out", str(out)]) == 0
    for name in ("metrics.tsv", "report.tsv", "report.json"):
        assert (out / name).read_bytes() == (run_dir / name).read_bytes(), name


# ---------------------------------------------------------------- 其他子命令

def test_augment_without_alignments(tmp_path):
    kgs = [make_kg("a", 0, 3, 1, train=[(0, 0, 1)]), make_kg("b", 1, 3, 1, train=[(1, 0, 2)])]
    manifest = write_dataset(make_store(kgs, shared=True), tmp_path / "data")
    assert main(["augment", "--manifest", str(manifest), "--out", str(tmp_path / "aug")]) == 0
    summary = json.loads((tmp_path / "aug" / "summary.json").read_text(encoding="utf-8"))
    assert summary["new_triples"] == 0 and summary["new_alignments"] == 0
    assert (tmp_path / "aug" / "new_triples.tsv").read_text(encoding="utf-8") == ""


def test_augment_writes_loadable_dataset(dataset, tmp_path):
    assert main(["augment", "--manifest", str(dataset), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    augmented = load_dataset(load_manifest(tmp_path / "dataset" / "manifest.yaml"))
    original = load_dataset(load_manifest(dataset))
    added = sum(len(a.train) - len(o.train) for a, o in zip(augmented.kgs, original.kgs))
    assert added == summary["new_triples"]


def test_diagnose(dataset, tmp_path, capsys):
    out = tmp_path / "components.csv"
    assert main(["diagnose", "--manifest", str(dataset), "--out", str(out)]) == 0
    assert "2\t" in capsys.readouterr().out
    with open(out, encoding="utf-8") as f:
        assert next(csv.reader(f)) == ["size", "count"]


def test_export_correlation(run_dir, tmp_path):
    path = tmp_path / "fused.csv"
    assert main(["export-corr", "--run", str(run_dir), "--model", "fused", "--out", str(path)]) == 0
    with open(path, encoding="utf-8") as f:
        header = next(csv.reader(f))
    assert header == ["relation", "r0", "r1", "r2", "r3", "ALIGN"]
    assert main(["export-corr", "--run", str(run_dir), "--model", "kg1", "--out", str(tmp_path / "k.csv")]) == 0
    assert main(["export-corr", "--run", str(run_dir), "--model", "nope", "--out", str(tmp_path / "x.csv")]) == 1


def test_sample(dataset, tmp_path):
    assert main(["sample", "--manifest", str(dataset), "--keep-fraction", "0.5", "--seed", "2",
                 "--out", str(tmp_path / "s")]) == 0
    sampled = load_dataset(load_manifest(tmp_path / "s" / "manifest.yaml"))
    original = load_dataset(load_manifest(dataset))
    assert len(sampled.alignments) == round(0.5 * len(original.alignments))
    assert main(["sample", "--manifest", str(dataset), "--keep-fraction", "0", "--out", str(tmp_path / "t")]) == 1


@pytest.mark.parametrize("mode", ["entity", "triple"])
def test_synth_removal_modes(tmp_path, mode):
    assert main(["synth", "--entities", "40", "--relations", "4", "--triples", "160", "--removal-mode", mode,
                 "--out", str(tmp_path)]) == 0
    store = load_dataset(load_manifest(tmp_path / "manifest.yaml"))
    for kg in store.kgs:
        assert len(kg.train) == 160 - 48
        assert len(kg.valid) + len(kg.test) == 48
