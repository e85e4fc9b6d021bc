"""
评估结果导出

- report.tsv：每个 (行标签, KG) 一行，另附每个行标签的 KG 平均
- report.json：同样内容的结构化摘要
- ranks.tsv：可选的逐查询排名
- components.csv：对齐连通分量统计
"""
import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from ..models import AlignmentComponentReport, RankingReport

REPORT_COLUMNS = ("row", "kg", "split", "filter", "tasks", "mrr", "hits1", "hits10", "n_queries", "n_unseen")
MEAN_ROW = "mean"


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def report_rows(rows: Sequence[Tuple[str, RankingReport]]) -> List[List[str]]:
    out = []
    for label, report in rows:
        tasks = ",".join(report.task_set)
        for kg_name, m in report.per_kg.items():
            out.append([label, kg_name, report.split, report.filter_mode.value, tasks,
                        _fmt(m.mrr), _fmt(m.hits1), _fmt(m.hits10), str(m.n_queries), str(m.n_unseen)])
        scored = [m for m in report.per_kg.values() if m.n_queries > 0]
        if scored:
            n = len(scored)
            out.append([label, MEAN_ROW, report.split, report.filter_mode.value, tasks,
                        _fmt(report.mean_mrr()),
                        _fmt(sum(m.hits1 for m in scored) / n),
                        _fmt(sum(m.hits10 for m in scored) / n),
                        str(sum(m.n_queries for m in scored)),
                        str(sum(m.n_unseen for m in scored))])
    return out


def write_report_tsv(rows: Sequence[Tuple[str, RankingReport]], path) -> Path:
    path = Path(path)
    lines = ["\t".join(REPORT_COLUMNS)] + ["\t".join(r) for r in report_rows(rows)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def report_to_dict(report: RankingReport) -> Dict[str, Any]:
    return {
        "model": report.model,
        "split": report.split,
        "filter_mode": report.filter_mode.value,
        "tasks": list(report.task_set),
        "mean_mrr": report.mean_mrr(),
        "per_kg": {
            name: {"mrr": m.mrr, "hits1": m.hits1, "hits10": m.hits10,
                   "n_queries": m.n_queries, "n_unseen": m.n_unseen}
            for name, m in report.per_kg.items()
        },
    }


def write_report_json(rows: Sequence[Tuple[str, RankingReport]], path) -> Path:
    path = Path(path)
    doc = {label: report_to_dict(report) for label, report in rows}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def write_rank_dump(rows: Sequence[Tuple[str, RankingReport]], path, store=None) -> Path:
    """逐查询排名；给定 store 时写出实体与关系名"""
    path = Path(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, delimiter='\t', lineterminator='\n')
        writer.writerow(["row", "kg", "task", "head", "relation", "tail", "rank"])
        for label, report in rows:
            for kg_name, ranks in report.ranks.items():
                kg = store.kg_by_name(kg_name) if store is not None else None
                for task, h, r, t, rank in ranks:
                    if kg is not None:
                        h, r, t = kg.entity_names[h], kg.relation_names[r], kg.entity_names[t]
                    writer.writerow([label, kg_name, task, h, r, t, rank])
    return path


def write_component_csv(report: AlignmentComponentReport, path, store=None) -> Path:
    """分量大小直方图，以及超过阈值的分量成员"""
    path = Path(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(["size", "count"])
        for size, count in sorted(report.histogram.items()):
            writer.writerow([size, count])
        if report.flagged:
            writer.writerow([])
            writer.writerow(["component", "kg", "entity"])
            for idx, component in enumerate(report.flagged):
                for ref in component:
                    if store is not None:
                        kg = store.kgs[ref.kg_id]
                        writer.writerow([idx, kg.name, kg.entity_names[ref.local_id]])
                    else:
                        writer.writerow([idx, ref.kg_id, ref.local_id])
    return path
