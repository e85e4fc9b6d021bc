"""
过滤排序评估

rank = 1 + #{未过滤且 goodness 严格更大的候选} + #{未过滤、goodness 相等且 id 更小的候选}
查询按 (任务, 三元组顺序) 编号，多线程分块计算后按编号顺序用 math.fsum 汇总。
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..errors import InvariantViolation
from ..models import FilterMode, KgData, KgMetrics, MultiKgStore, RankingReport, Task
from .scorers import Scorer

logger = logging.getLogger(__name__)

QUERY_CHUNK = 256
FILTER_SPLITS = {
    FilterMode.TRADITIONAL: ("train", "valid", "test"),
    FilterMode.TRAIN_ONLY: ("train",),
    FilterMode.RAW: (),
}


class PositiveIndex:
    """查询 -> 已知正确答案集合，按过滤模式选择参与过滤的划分"""

    def __init__(self, kg: KgData, mode):
        self.mode = FilterMode(mode)
        self.tails: Dict[Tuple[int, int], Set[int]] = {}
        self.heads: Dict[Tuple[int, int], Set[int]] = {}
        for split in FILTER_SPLITS[self.mode]:
            for h, r, t in kg.split(split).tolist():
                self.tails.setdefault((h, r), set()).add(t)
                self.heads.setdefault((r, t), set()).add(h)

    def known(self, task, query: Tuple[int, int]) -> Set[int]:
        """tail 任务 query=(h, r)，head 任务 query=(r, t)"""
        table = self.tails if Task(task) is Task.TAIL else self.heads
        return table.get(tuple(int(x) for x in query), set())


def rank_from_scores(scores: np.ndarray, truth: int, exclude: Iterable[int] = ()) -> int:
    """由一个查询对全部候选的 goodness 计算过滤后的排名"""
    scores = np.asarray(scores)
    keep = np.ones(len(scores), dtype=bool)
    others = [c for c in exclude if c != truth]
    if others:
        keep[np.asarray(others, dtype=np.int64)] = False
    if not 0 <= truth < len(scores) or not keep[truth]:
        raise InvariantViolation(f"正确答案 {truth} 不在候选中或被过滤")
    target = scores[truth]
    greater = np.count_nonzero(keep & (scores > target))
    ties = np.count_nonzero(keep[:truth] & (scores[:truth] == target))
    return int(1 + greater + ties)


def rank_query(scorer: Scorer, query: Tuple[int, int], truth: int, filter_mode,
               positives: Optional[PositiveIndex], task=Task.TAIL) -> int:
    """单个查询的排名；tail 任务 query=(h, r)，head 任务 query=(r, t)"""
    a, b = query
    task = Task(task)
    if task is Task.TAIL:
        scores = scorer.score_tails(np.array([a]), np.array([b]))[0]
    else:
        scores = scorer.score_heads(np.array([a]), np.array([b]))[0]
    exclude = () if FilterMode(filter_mode) is FilterMode.RAW or positives is None \
        else positives.known(task, query)
    return rank_from_scores(scores, truth, exclude)


def _rank_chunk(scorer: Scorer, positives: PositiveIndex, task: Task, triples: np.ndarray) -> List[int]:
    if task is Task.TAIL:
        scores = scorer.score_tails(triples[:, 0], triples[:, 1])
        queries, truths = triples[:, [0, 1]], triples[:, 2]
    else:
        scores = scorer.score_heads(triples[:, 1], triples[:, 2])
        queries, truths = triples[:, [1, 2]], triples[:, 0]
    return [rank_from_scores(row, int(truth), positives.known(task, tuple(q)))
            for row, q, truth in zip(scores, queries.tolist(), truths.tolist())]


def compute_ranks(scorer: Scorer, kg: KgData, split: str, filter_mode, tasks: Sequence[str],
                  threads: Optional[int] = None,
                  positives: Optional[PositiveIndex] = None) -> List[Tuple[str, int, int, int, int]]:
    """按查询编号顺序返回 (task, h, r, t, rank)"""
    positives = positives or PositiveIndex(kg, filter_mode)
    triples = kg.split(split)
    jobs = []
    for task_name in tasks:
        task = Task(task_name)
        for start in range(0, len(triples), QUERY_CHUNK):
            jobs.append((task, triples[start:start + QUERY_CHUNK]))
    if not jobs:
        return []
    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        chunks = list(pool.map(lambda job: _rank_chunk(scorer, positives, job[0], job[1]), jobs))
    out = []
    for (task, part), ranks in zip(jobs, chunks):
        for (h, r, t), rank in zip(part.tolist(), ranks):
            out.append((task.value, h, r, t, rank))
    return out


def metrics_from_ranks(ranks: Sequence[int], n_unseen: int = 0) -> KgMetrics:
    n = len(ranks)
    if n == 0:
        return KgMetrics(mrr=0.0, hits1=0.0, hits10=0.0, n_queries=0, n_unseen=n_unseen)
    return KgMetrics(
        mrr=math.fsum(1.0 / r for r in ranks) / n,
        hits1=sum(1 for r in ranks if r <= 1) / n,
        hits10=sum(1 for r in ranks if r <= 10) / n,
        n_queries=n,
        n_unseen=n_unseen,
    )


def _count_unseen(kg: KgData, rows: Sequence[Tuple[str, int, int, int, int]]) -> int:
    unseen = kg.unseen_entities()
    if not unseen:
        return 0
    return sum(1 for _, h, _, t, _ in rows if h in unseen or t in unseen)


def evaluate(scorers: Dict[str, Scorer], store: MultiKgStore, split: str = "test",
             filter_mode=FilterMode.TRADITIONAL, tasks: Sequence[str] = ("tail",),
             threads: Optional[int] = None, model: str = "", keep_ranks: bool = False) -> RankingReport:
    """对每个有打分器的 KG 计算 MRR / Hits@1 / Hits@10"""
    mode = FilterMode(filter_mode)
    tasks = tuple(Task(t).value for t in tasks)
    per_kg = {}
    all_ranks = {}
    for kg in store.kgs:
        scorer = scorers.get(kg.name)
        if scorer is None:
            continue
        rows = compute_ranks(scorer, kg, split, mode, tasks, threads)
        per_kg[kg.name] = metrics_from_ranks([row[-1] for row in rows], _count_unseen(kg, rows))
        if keep_ranks:
            all_ranks[kg.name] = rows
        logger.debug("%s/%s %s: MRR=%.4f (%d 个查询)", model, kg.name, split,
                     per_kg[kg.name].mrr, per_kg[kg.name].n_queries)
    return RankingReport(per_kg=per_kg, filter_mode=mode, task_set=tasks, split=split,
                         model=model, ranks=all_ranks)
