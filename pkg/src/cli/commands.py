"""
子命令实现

每个命令接收 argparse 的 Namespace，返回进程退出码；错误以 KgcError 抛出，
由 main 统一转换为退出码。输入文件从不被修改。
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..datasets import make_synthetic_complementary, sample_dangling
from ..encoder import build_fused_graph, build_kg_graph
from ..errors import CheckpointError, ConfigError, UsageError
from ..evaluation import (
    ensemble_scorers, evaluate, fused_scorers, individual_scorers, relation_correlation,
    relation_names_for, write_component_csv, write_correlation_csv, write_rank_dump,
    write_report_json, write_report_tsv,
)
from ..kg import (
    alignment_closure, alignment_component_report, augment_store, build_fused_kg,
    parameter_swap_triples,
)
from ..models import FusedKg, MultiKgStore, RankingReport, RunConfig, SamplingSpec, TrainConfig
from ..models.config import TASKS
from ..parsers import (
    FUSED_NAME, dump_train_config, load_checkpoint, load_dataset, load_manifest, load_train_config,
    save_checkpoint, store_vocab_digest, write_dataset, write_manifest,
)
from ..training import FUSED_MODEL, MetricsLog, MultiKgTrainer, TrainedModels, augment_for_training

logger = logging.getLogger(__name__)

STAGES = ("stage1", "stage2")
ALL_ROWS = ("individual", "fused", "ensemble")
MODEL_CHOICES = ALL_ROWS + ("all",)


def _run_config(args) -> RunConfig:
    return RunConfig(
        manifest=Path(args.manifest) if getattr(args, "manifest", None) else None,
        train_config=Path(args.config) if getattr(args, "config", None) else None,
        out_dir=Path(args.out) if getattr(args, "out", None) else None,
        flags={k: v for k, v in vars(args).items() if k not in ("handler",)},
    )


def _labels(fused_label: str, distilled: bool) -> Dict[str, str]:
    if distilled:
        return {"individual": "KGC-I-D", "fused": f"{fused_label}-D", "ensemble": "CKGC-CKD"}
    return {"individual": "KGC-I", "fused": fused_label, "ensemble": "ensemble"}


def build_reports(individual, fused_model, store: MultiKgStore, fused_kg: FusedKg, fused_message: str,
                  split: str, filter_mode, tasks, which: Sequence[str] = ALL_ROWS, distilled: bool = True,
                  threads: Optional[int] = None, keep_ranks: bool = False) -> List[Tuple[str, RankingReport]]:
    """按消融表的行生成排序报告"""
    fused_label = "KGC-A" if fused_message == "augmented" else "KGC-C"
    labels = _labels(fused_label, distilled)
    graphs = {kg.name: build_kg_graph(kg) for kg in store.kgs}
    ind = individual_scorers(individual, store, graphs)
    fus = fused_scorers(fused_model, store, fused_kg, build_fused_graph(fused_kg, fused_message))
    chosen = {
        "individual": ind,
        "fused": fus,
        "ensemble": ensemble_scorers(ind, fus),
    }
    rows = []
    for key in which:
        report = evaluate(chosen[key], store, split, filter_mode, tasks, threads,
                          model=labels[key], keep_ranks=keep_ranks)
        rows.append((labels[key], report))
    return rows


def _write_reports(rows, out_dir: Path, store: MultiKgStore, dump_ranks: bool):
    write_report_tsv(rows, out_dir / "report.tsv")
    write_report_json(rows, out_dir / "report.json")
    if dump_ranks:
        write_rank_dump(rows, out_dir / "ranks.tsv", store)
    for label, report in rows:
        print(f"{label:10s} {report.split} {report.filter_mode.value} "
              f"{','.join(report.task_set)}: MRR={report.mean_mrr():.4f}")


def save_models(models: TrainedModels, directory: Path):
    """每个模型一个检查点：{kg}.ckpt 与 fused.ckpt"""
    for name, model in models.all_models().items():
        save_checkpoint(model, directory / f"{name}.ckpt", kg_name=name,
                        digest=store_vocab_digest(models.store, name))


def cmd_train(args) -> int:
    """两阶段训练，写出检查点、指标日志和消融报告"""
    run = _run_config(args)
    manifest = load_manifest(run.manifest)
    config = load_train_config(run.train_config) if run.train_config else TrainConfig()
    out = run.prepare_out_dir()
    dump_train_config(config, out / "config.yaml")
    write_manifest(manifest, out / "manifest.yaml", relative=False)

    store = load_dataset(manifest, threads=args.threads)
    trainer = MultiKgTrainer(store, config, MetricsLog(out / "metrics.tsv"), threads=args.threads)
    models = trainer.train_stage1(trainer.init_models())
    save_models(models, out / "checkpoints" / "stage1")

    def reports(distilled: bool, which):
        return build_reports(models.individual, models.fused, trainer.store, trainer.fused_kg,
                             config.fused_message, "test", config.filter_mode, config.eval_tasks,
                             which=which, distilled=distilled, threads=args.threads,
                             keep_ranks=args.dump_ranks)

    rows = reports(False, ("individual", "fused"))
    if not args.stage1_only:
        trainer.train_stage2(models)
        save_models(models, out / "checkpoints" / "stage2")
        rows += reports(True, ALL_ROWS)
    _write_reports(rows, out, trainer.store, args.dump_ranks)
    logger.info("训练完成，结果目录: %s", out)
    return 0


def _load_run_models(run_dir: Path, stage: str, manifest_path: Optional[str], threads: Optional[int]):
    """读取运行目录中的配置、数据集和检查点"""
    if stage not in STAGES:
        raise ConfigError(f"未知阶段: {stage}")
    config = load_train_config(run_dir / "config.yaml")
    manifest = load_manifest(Path(manifest_path) if manifest_path else run_dir / "manifest.yaml")
    store = load_dataset(manifest, threads=threads)
    if config.use_meta_path:
        store = augment_for_training(store)
    fused_kg = build_fused_kg(store)
    ckpt_dir = run_dir / "checkpoints" / stage
    individual = {kg.name: load_checkpoint(ckpt_dir / f"{kg.name}.ckpt", store_vocab_digest(store, kg.name))
                  for kg in store.kgs}
    fused = load_checkpoint(ckpt_dir / f"{FUSED_MODEL}.ckpt", store_vocab_digest(store, FUSED_NAME))
    if fused.num_entities != fused_kg.num_entities or fused.num_relations != fused_kg.num_relations:
        raise CheckpointError("融合模型检查点与融合图规模不一致")
    return config, store, fused_kg, individual, fused


def cmd_evaluate(args) -> int:
    """对运行目录中某个阶段的检查点生成排序报告"""
    run_dir = Path(args.run)
    config, store, fused_kg, individual, fused = _load_run_models(run_dir, args.stage, args.manifest,
                                                                  args.threads)
    filter_mode = args.filter or config.filter_mode
    tasks = tuple(t.strip() for t in args.tasks.split(",")) if args.tasks else config.eval_tasks
    if not tasks or any(t not in TASKS for t in tasks):
        raise UsageError(f"--tasks 只能包含 {TASKS}: {args.tasks}")
    fused_message = "augmented" if fused.with_align else "plain"
    which = ALL_ROWS if args.model == "all" else (args.model,)
    rows = build_reports(individual, fused, store, fused_kg, fused_message, args.split, filter_mode, tasks,
                         which=which, distilled=args.stage == "stage2", threads=args.threads,
                         keep_ranks=args.dump_ranks)
    out = Path(args.out) if args.out else run_dir / "eval" / args.stage
    out.mkdir(parents=True, exist_ok=True)
    _write_reports(rows, out, store, args.dump_ranks)
    return 0


def cmd_augment(args) -> int:
    """元路径增强：写出新三元组、新对齐、增强后的完整数据集与计数摘要"""
    run = _run_config(args)
    store = load_dataset(load_manifest(run.manifest), threads=args.threads)
    triples = parameter_swap_triples(store)
    closure = alignment_closure(store)
    out = run.prepare_out_dir()

    with open(out / "new_triples.tsv", "w", encoding="utf-8", newline="\n") as f:
        for t in sorted(triples):
            kg = store.kgs[t.kg_id]
            h, r, tail = t.as_ids()
            f.write(f"{kg.name}\t{kg.entity_names[h]}\t{kg.relation_names[r]}\t{kg.entity_names[tail]}\n")
    with open(out / "new_alignments.tsv", "w", encoding="utf-8", newline="\n") as f:
        for a in sorted(closure):
            left, right = store.kgs[a.left.kg_id], store.kgs[a.right.kg_id]
            f.write(f"{left.name}\t{left.entity_names[a.left.local_id]}\t"
                    f"{right.name}\t{right.entity_names[a.right.local_id]}\n")

    augmented = augment_store(store, triples, closure)
    write_dataset(augmented, out / "dataset")
    summary = {
        "new_triples": len(triples),
        "new_triples_per_kg": {kg.name: sum(1 for t in triples if t.kg_id == kg.kg_id) for kg in store.kgs},
        "new_alignments": len(closure),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"新增三元组 {len(triples)}，新增对齐 {len(closure)}")
    return 0


def cmd_diagnose(args) -> int:
    """对齐连通分量直方图"""
    store = load_dataset(load_manifest(args.manifest), threads=args.threads)
    report = alignment_component_report(store, args.threshold)
    print("分量大小\t个数")
    for size, count in report.histogram.items():
        print(f"{size}\t{count}")
    print(f"超过阈值 {report.threshold} 的分量: {len(report.flagged)}")
    print(f"含同一 KG 多个实体的分量: {report.same_kg_components}")
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_component_csv(report, path, store)
    return 0


def cmd_export_correlation(args) -> int:
    """导出某个模型编码后关系嵌入的相关矩阵"""
    run_dir = Path(args.run)
    _, store, fused_kg, individual, fused = _load_run_models(run_dir, args.stage, args.manifest, args.threads)
    if args.model == FUSED_MODEL:
        model = fused
        graph = build_fused_graph(fused_kg, "augmented" if fused.with_align else "plain")
        names = relation_names_for(store)
    elif args.model in individual:
        model = individual[args.model]
        graph = build_kg_graph(store.kg_by_name(args.model))
        names = relation_names_for(store, args.model)
    else:
        raise ConfigError(f"未知模型: {args.model}（可选 {sorted(individual)} 或 {FUSED_MODEL}）")
    matrix = relation_correlation(model, graph)
    path = write_correlation_csv(matrix, names, args.out)
    print(f"相关矩阵 {matrix.shape[0]}×{matrix.shape[1]} 已写入 {path}")
    return 0


def cmd_sample(args) -> int:
    """悬空实体采样，写出新数据集"""
    run = _run_config(args)
    store = load_dataset(load_manifest(run.manifest), threads=args.threads)
    spec = SamplingSpec(alignment_keep_fraction=args.keep_fraction, seed=args.seed,
                        removal_side=args.removal_side)
    sampled = sample_dangling(store, spec)
    path = write_dataset(sampled, run.prepare_out_dir())
    dangling = sum(len(kg.dangling) for kg in sampled.kgs)
    print(f"保留对齐 {len(sampled.alignments)}，悬空实体 {dangling}，清单 {path}")
    return 0


def cmd_synth(args) -> int:
    """生成合成互补数据集"""
    run = _run_config(args)
    store = make_synthetic_complementary(
        n_entities=args.entities, n_relations=args.relations, n_triples=args.triples,
        n_kgs=args.kgs, overlap_fraction=args.overlap, removal_fraction=args.removal, seed=args.seed,
        removal_mode=args.removal_mode)
    path = write_dataset(store, run.prepare_out_dir())
    print(f"合成数据集已写入 {path}")
    return 0
