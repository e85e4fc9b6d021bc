"""
悬空实体采样

先均匀随机保留一部分对齐，再把被移除对齐在指定一侧、且不再有任何对齐的实体
的三元组从所有划分中排除；另一侧失去全部对齐的实体标记为悬空实体。
实体词表保持不变，id 不会改变。
"""
import dataclasses
import logging
import math
from typing import Dict, List, Set

import numpy as np

from ..errors import PreconditionError
from ..models import EntityRef, MultiKgStore, SamplingSpec, SPLITS

logger = logging.getLogger(__name__)


def sample_dangling(store: MultiKgStore, spec: SamplingSpec) -> MultiKgStore:
    """按 SamplingSpec 生成更稀疏、带悬空实体的数据集（给定种子时结果确定）"""
    if not store.alignments:
        raise PreconditionError("悬空实体采样要求存储中存在对齐")

    alignments = store.sorted_alignments()
    n = len(alignments)
    n_keep = min(n, int(math.floor(spec.alignment_keep_fraction * n + 0.5)))
    rng = np.random.default_rng(spec.seed)
    keep_idx = set(rng.choice(n, size=n_keep, replace=False).tolist())
    kept = [a for i, a in enumerate(alignments) if i in keep_idx]
    removed = [a for i, a in enumerate(alignments) if i not in keep_idx]

    still_aligned: Set[EntityRef] = set()
    for a in kept:
        still_aligned.add(a.left)
        still_aligned.add(a.right)

    def side(a):
        return a.right if spec.removal_side == "right" else a.left

    def other(a):
        return a.left if spec.removal_side == "right" else a.right

    removed_entities = {side(a) for a in removed if side(a) not in still_aligned}
    dangling = {other(a) for a in removed if other(a) not in still_aligned} - removed_entities

    removed_by_kg: Dict[int, List[int]] = {}
    for ref in removed_entities:
        removed_by_kg.setdefault(ref.kg_id, []).append(ref.local_id)

    kgs = []
    excluded = 0
    for kg in store.kgs:
        ids = np.array(sorted(removed_by_kg.get(kg.kg_id, [])), dtype=np.int64)
        splits = {}
        for split in SPLITS:
            arr = kg.split(split)
            if len(ids):
                hit = np.isin(arr[:, 0], ids) | np.isin(arr[:, 2], ids)
                excluded += int(hit.sum())
                arr = arr[~hit]
            splits[split] = arr
        newly_dangling = {ref.local_id for ref in dangling if ref.kg_id == kg.kg_id}
        kgs.append(dataclasses.replace(kg, dangling=frozenset(kg.dangling | newly_dangling), **splits))

    result = dataclasses.replace(
        store,
        kgs=kgs,
        alignments=frozenset(kept),
        fused=None,
        warnings=list(store.warnings),
    )
    result.validate()
    logger.info("悬空采样: 保留对齐 %d/%d，移除实体 %d，悬空实体 %d，排除三元组 %d",
                len(kept), n, len(removed_entities), len(dangling), excluded)
    return result
