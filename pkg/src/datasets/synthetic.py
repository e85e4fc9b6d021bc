"""
合成互补多 KG 数据集

真值 KG 建在一张二维网格上：实体分到网格格子里，关系 r 是一个固定平移
(dx_r, dy_r)，(h, r, t) 成立当且仅当 t 所在格子是 h 所在格子平移后的格子。
平移不回绕，平移类解码器可以精确表示这一结构。格子大小按所需三元组数自动放大。

真值复制成 n_kgs 个视图，各视图移除互不相交的一部分三元组作为验证/测试集：
- entity：每个视图挑一组互不相交的焦点实体，移除与之相连的三元组，焦点实体
  在本视图中只出现在验证/测试集里，只能借助对齐从其他视图获得信息
- triple：均匀随机移除
视图之间对齐 overlap_fraction 比例的实体，各视图的本地 id 是真值 id 的随机置换。
"""
import logging
import math
from typing import List, Tuple

import numpy as np

from ..errors import ConfigError, PreconditionError
from ..models import EntityRef, KgData, MultiKgStore, SeedAlignment

logger = logging.getLogger(__name__)

REMOVAL_MODES = ("entity", "triple")


class _Grid:
    """实体到网格格子的划分与关系平移"""

    def __init__(self, rng: np.random.Generator, n_entities: int, n_relations: int, cell_size: int):
        self.n_cells = math.ceil(n_entities / cell_size)
        self.width = math.ceil(math.sqrt(2 * self.n_cells))
        self.cell_of = rng.permutation(n_entities) % self.n_cells
        self.members = [np.flatnonzero(self.cell_of == c) for c in range(self.n_cells)]
        if self.n_cells == 1:
            self.shifts = np.zeros((n_relations, 2), dtype=np.int64)
        else:
            height = math.ceil(self.n_cells / self.width)
            mx, my = max(1, self.width // 4), height // 4
            shifts = []
            while len(shifts) < n_relations:
                dx, dy = int(rng.integers(-mx, mx + 1)), int(rng.integers(-my, my + 1))
                if (dx, dy) != (0, 0):
                    shifts.append((dx, dy))
            self.shifts = np.array(shifts, dtype=np.int64)
        self.targets = np.array([[self._target(c, r) for c in range(self.n_cells)] for r in range(n_relations)],
                                dtype=np.int64).reshape(n_relations, self.n_cells)

    def _target(self, cell: int, relation: int) -> int:
        """平移后的格子，越界或空格子返回 -1"""
        x = cell % self.width + int(self.shifts[relation, 0])
        y = cell // self.width + int(self.shifts[relation, 1])
        if not 0 <= x < self.width or y < 0:
            return -1
        target = y * self.width + x
        return target if target < self.n_cells else -1

    @property
    def capacity(self) -> int:
        sizes = [len(m) for m in self.members]
        return sum(sizes[c] * sizes[t] for row in self.targets.tolist() for c, t in enumerate(row) if t >= 0)


def _ground_truth(rng: np.random.Generator, n_entities: int, n_relations: int,
                  n_triples: int) -> np.ndarray:
    """生成互不重复的真值三元组 (n, 3)"""
    for cell_size in range(1, n_entities + 1):
        grid = _Grid(rng, n_entities, n_relations, cell_size)
        if grid.capacity >= n_triples:
            break
    else:
        raise PreconditionError(f"无法生成 {n_triples} 个不重复三元组（上限 {grid.capacity}）")
    logger.debug("合成网格: %d 个格子，每格约 %d 个实体", grid.n_cells, cell_size)

    seen = set()
    triples: List[Tuple[int, int, int]] = []
    for _ in range(1000):
        if len(triples) >= n_triples:
            break
        heads = rng.integers(0, n_entities, size=n_triples)
        rels = rng.integers(0, n_relations, size=n_triples)
        picks = rng.random(n_triples)
        for h, r, p in zip(heads.tolist(), rels.tolist(), picks.tolist()):
            target = grid.targets[r, grid.cell_of[h]]
            if target < 0:
                continue
            members = grid.members[target]
            key = (h, r, int(members[int(p * len(members))]))
            if key in seen:
                continue
            seen.add(key)
            triples.append(key)
            if len(triples) >= n_triples:
                break
    if len(triples) < n_triples:
        raise PreconditionError(f"只生成了 {len(triples)}/{n_triples} 个不重复三元组")
    return np.array(triples, dtype=np.int64)


def _entity_removals(rng: np.random.Generator, truth: np.ndarray, n_entities: int, n_kgs: int,
                     chunk: int) -> List[np.ndarray]:
    """按焦点实体移除：各视图轮流取一个实体，移除其尚未被其他视图取走的三元组，凑满 chunk 个为止"""
    taken = np.zeros(len(truth), dtype=bool)
    entity_order = rng.permutation(n_entities).tolist()
    picked: List[List[np.ndarray]] = [[] for _ in range(n_kgs)]
    counts = [0] * n_kgs
    cursor = 0
    while cursor < n_entities and min(counts) < chunk:
        for k in range(n_kgs):
            if counts[k] >= chunk or cursor >= n_entities:
                continue
            e = entity_order[cursor]
            cursor += 1
            incident = np.flatnonzero(((truth[:, 0] == e) | (truth[:, 2] == e)) & ~taken)
            incident = rng.permutation(incident)[:chunk - counts[k]]
            taken[incident] = True
            picked[k].append(incident)
            counts[k] += len(incident)
    # 不足 chunk 的视图从剩余三元组中随机补齐
    for k in range(n_kgs):
        if counts[k] < chunk:
            rest = rng.permutation(np.flatnonzero(~taken))[:chunk - counts[k]]
            taken[rest] = True
            picked[k].append(rest)
            counts[k] += len(rest)
    return [np.sort(np.concatenate(p)) if p else np.empty(0, dtype=np.int64) for p in picked]


def _triple_removals(rng: np.random.Generator, n_triples: int, n_kgs: int, chunk: int) -> List[np.ndarray]:
    order = rng.permutation(n_triples)
    return [np.sort(order[k * chunk:(k + 1) * chunk]) for k in range(n_kgs)]


def make_synthetic_complementary(n_entities: int, n_relations: int, n_triples: int, n_kgs: int,
                                 overlap_fraction: float, removal_fraction: float,
                                 seed: int = 0, removal_mode: str = "entity") -> MultiKgStore:
    """生成互补视图组成的多 KG 存储，被移除的三元组作为该视图的验证/测试集"""
    for name, value in (("n_entities", n_entities), ("n_relations", n_relations),
                        ("n_triples", n_triples), ("n_kgs", n_kgs)):
        if int(value) < 1:
            raise ConfigError(f"{name} 必须为正: {value}")
    if not 0.0 < overlap_fraction < 1.0:
        raise ConfigError(f"overlap_fraction 必须在 (0, 1) 内: {overlap_fraction}")
    if not 0.0 < removal_fraction < 1.0:
        raise ConfigError(f"removal_fraction 必须在 (0, 1) 内: {removal_fraction}")
    if n_kgs * removal_fraction > 1.0:
        raise ConfigError(f"n_kgs * removal_fraction = {n_kgs * removal_fraction} 超过 1，"
                          "各视图的移除部分无法互不相交")
    if removal_mode not in REMOVAL_MODES:
        raise ConfigError(f"removal_mode 必须是 {REMOVAL_MODES} 之一: {removal_mode}")

    rng = np.random.default_rng(seed)
    truth = _ground_truth(rng, n_entities, n_relations, n_triples)

    chunk = int(math.floor(removal_fraction * n_triples))
    if removal_mode == "entity":
        removals = _entity_removals(rng, truth, n_entities, n_kgs, chunk)
    else:
        removals = _triple_removals(rng, n_triples, n_kgs, chunk)
    perms = [rng.permutation(n_entities) for _ in range(n_kgs)]   # 真值 id -> 视图本地 id
    relation_names = [f"r{j}" for j in range(n_relations)]

    kgs = []
    for k in range(n_kgs):
        removed_idx = removals[k]
        keep = np.ones(n_triples, dtype=bool)
        keep[removed_idx] = False
        local = truth.copy()
        local[:, 0] = perms[k][truth[:, 0]]
        local[:, 2] = perms[k][truth[:, 2]]
        held = local[removed_idx]
        half = len(held) // 2
        names = [""] * n_entities
        for g in range(n_entities):
            names[perms[k][g]] = f"e{g}"
        kgs.append(KgData(
            name=f"kg{k}",
            kg_id=k,
            entity_names=names,
            relation_names=list(relation_names),
            train=local[keep],
            valid=held[:half],
            test=held[half:],
        ))

    n_align = int(math.floor(overlap_fraction * n_entities))
    aligned = np.sort(rng.choice(n_entities, size=n_align, replace=False))
    alignments = set()
    for k in range(n_kgs):
        for l in range(k + 1, n_kgs):
            for g in aligned.tolist():
                alignments.add(SeedAlignment(EntityRef(k, int(perms[k][g])), EntityRef(l, int(perms[l][g]))))

    store = MultiKgStore(
        name=f"synthetic-{n_kgs}kg-seed{seed}",
        kgs=kgs,
        alignments=frozenset(alignments),
        shared_relation_schema=True,
    )
    store.validate()
    logger.info("合成数据集: %d 个视图，真值 %d 个三元组，每视图按 %s 移除 %d，对齐实体 %d",
                n_kgs, n_triples, removal_mode, chunk, n_align)
    return store
