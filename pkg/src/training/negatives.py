"""
负采样

每个负例均匀选择替换头或尾，替换实体在三元组所属 KG 的实体范围 [low, high) 内均匀
抽取；若得到已知的训练正例则重新抽取，最多 max_resample 次，之后接受最后一次结果并计数。
已知正例用整数键 (h * |R| + r) * |E| + t 表示，查询用 np.isin 向量化完成。
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from ..errors import PreconditionError
from ..models import KgData, NegativeSample, Slot, Triple

logger = logging.getLogger(__name__)


class NegativeSampler:
    """基于已知正例集合的负例生成器"""

    def __init__(self, positives: np.ndarray, num_entities: int, num_relations: int,
                 entity_low: Optional[np.ndarray] = None, entity_high: Optional[np.ndarray] = None,
                 max_resample: int = 100):
        self.num_entities = int(num_entities)
        self.num_relations = int(num_relations)
        self.max_resample = int(max_resample)
        self.known = np.unique(self._keys(np.asarray(positives, dtype=np.int64).reshape(-1, 3)))
        self.entity_low = entity_low
        self.entity_high = entity_high
        self.exhausted = 0          # 重采样预算耗尽后被接受的负例数

    @classmethod
    def for_kg(cls, kg: KgData, max_resample: int = 100) -> "NegativeSampler":
        return cls(kg.train, kg.num_entities, kg.num_relations, max_resample=max_resample)

    def _keys(self, triples: np.ndarray) -> np.ndarray:
        return (triples[..., 0] * self.num_relations + triples[..., 1]) * self.num_entities + triples[..., 2]

    def _ranges(self, index: np.ndarray, shape: Tuple[int, ...]) -> Tuple[np.ndarray, np.ndarray]:
        if self.entity_low is None:
            return np.zeros(shape, dtype=np.int64), np.full(shape, self.num_entities, dtype=np.int64)
        low = np.broadcast_to(self.entity_low[index][:, None], shape)
        high = np.broadcast_to(self.entity_high[index][:, None], shape)
        return low, high

    def sample(self, triples: np.ndarray, rng: np.random.Generator, n: int,
               index: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """返回 (B, n, 3) 的负例以及 (B, n) 的替换位置（True 表示替换头实体）

        index 为 triples 中每一行在原数组中的位置，用于取各自的实体范围。
        """
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        shape = (len(triples), int(n))
        if index is None:
            index = np.arange(len(triples))
        low, high = self._ranges(np.asarray(index), shape)

        corrupt_head = rng.random(shape) < 0.5
        neg = np.repeat(triples[:, None, :], n, axis=1)
        pending = np.ones(shape, dtype=bool)
        for _ in range(self.max_resample + 1):
            count = int(pending.sum())
            if count == 0:
                break
            picks = rng.integers(low[pending], high[pending])
            rows = neg[pending]
            heads = corrupt_head[pending]
            rows[heads, 0] = picks[heads]
            rows[~heads, 2] = picks[~heads]
            neg[pending] = rows
            bad = np.isin(self._keys(rows), self.known)
            idx = np.flatnonzero(pending.ravel())
            still = np.zeros(pending.size, dtype=bool)
            still[idx[bad]] = True
            pending = still.reshape(shape)
        leftover = int(pending.sum())
        if leftover:
            self.exhausted += leftover
            logger.warning("%d 个负例在 %d 次重采样后仍是已知正例，已直接接受", leftover, self.max_resample)
        return neg, corrupt_head


def sample_negatives(triple: Triple, kg: KgData, rng: np.random.Generator, n: int,
                     max_resample: int = 100) -> List[NegativeSample]:
    """为单个三元组生成 n 个负例"""
    if kg.num_entities < 2:
        raise PreconditionError(f"{kg.name}: 负采样要求至少 2 个实体")
    sampler = NegativeSampler.for_kg(kg, max_resample=max_resample)
    neg, heads = sampler.sample(np.array([triple.as_ids()]), rng, n)
    out = []
    for (h, r, t), is_head in zip(neg[0].tolist(), heads[0].tolist()):
        out.append(NegativeSample(
            original=triple,
            corrupted=Triple.from_ids(kg.kg_id, h, r, t),
            corrupted_slot=Slot.HEAD if is_head else Slot.TAIL,
        ))
    return out
