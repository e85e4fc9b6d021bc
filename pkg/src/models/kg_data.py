"""
多知识图谱数据模型

定义实体、关系、三元组、种子对齐、单个 KG、多 KG 存储以及融合图等数据结构。
三元组在内部以 (head, relation, tail) 本地 id 的 int64 数组保存。
"""
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np

from ..errors import IngestIntegrityError, InvariantViolation

FUSED_KG_ID = -1  # 融合图关系保留的 kg_id
SPLITS = ("train", "valid", "test")


@dataclass(frozen=True, order=True)
class EntityRef:
    """实体引用"""
    kg_id: int                      # 所属 KG 序号
    local_id: int                   # KG 内稠密 id


@dataclass(frozen=True, order=True)
class RelationRef:
    """关系引用"""
    kg_id: int                      # 所属 KG 序号（融合图为 FUSED_KG_ID）
    local_id: int                   # KG 内稠密 id


@dataclass(frozen=True, order=True)
class Triple:
    """事实三元组"""
    head: EntityRef
    relation: RelationRef
    tail: EntityRef

    @property
    def kg_id(self) -> int:
        return self.head.kg_id

    def as_ids(self) -> Tuple[int, int, int]:
        """返回本地 id 三元组"""
        return (self.head.local_id, self.relation.local_id, self.tail.local_id)

    @classmethod
    def from_ids(cls, kg_id: int, h: int, r: int, t: int) -> "Triple":
        return cls(EntityRef(kg_id, int(h)), RelationRef(kg_id, int(r)), EntityRef(kg_id, int(t)))


@dataclass(frozen=True, order=True)
class SeedAlignment:
    """种子对齐，按 kg_id 从小到大的规范顺序保存"""
    left: EntityRef
    right: EntityRef

    def __post_init__(self):
        if self.left.kg_id == self.right.kg_id:
            raise IngestIntegrityError(f"对齐两端属于同一个 KG: {self.left} ~ {self.right}")
        if self.left.kg_id > self.right.kg_id:
            raise IngestIntegrityError(f"对齐未按规范顺序保存: {self.left} ~ {self.right}")

    @classmethod
    def canonical(cls, a: EntityRef, b: EntityRef) -> "SeedAlignment":
        """按规范顺序构造对齐"""
        if a.kg_id > b.kg_id:
            a, b = b, a
        return cls(a, b)


def _empty_triples() -> np.ndarray:
    return np.zeros((0, 3), dtype=np.int64)


@dataclass(eq=False)
class KgData:
    """单个知识图谱"""
    name: str
    kg_id: int
    entity_names: List[str]
    relation_names: List[str]
    train: np.ndarray = field(default_factory=_empty_triples)   # (n, 3) 本地 id
    valid: np.ndarray = field(default_factory=_empty_triples)
    test: np.ndarray = field(default_factory=_empty_triples)
    dangling: FrozenSet[int] = frozenset()                      # 失去全部对齐的实体

    @property
    def num_entities(self) -> int:
        return len(self.entity_names)

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def split(self, name: str) -> np.ndarray:
        """按名称取出划分"""
        if name not in SPLITS:
            raise KeyError(f"未知划分: {name}")
        return getattr(self, name)

    def triples(self, split: str = "train") -> List[Triple]:
        """以 Triple 对象列表返回一个划分"""
        return [Triple.from_ids(self.kg_id, h, r, t) for h, r, t in self.split(split)]

    def triple_set(self, split: str = "train") -> Set[Tuple[int, int, int]]:
        return {(int(h), int(r), int(t)) for h, r, t in self.split(split)}

    def known_triples(self) -> Set[Tuple[int, int, int]]:
        """三个划分的并集"""
        known = set()
        for name in SPLITS:
            known |= self.triple_set(name)
        return known

    def unseen_entities(self) -> Set[int]:
        """只出现在验证/测试集、从未出现在训练集的实体"""
        seen = set(self.train[:, [0, 2]].ravel().tolist())
        held = set(self.valid[:, [0, 2]].ravel().tolist()) | set(self.test[:, [0, 2]].ravel().tolist())
        return held - seen

    def validate(self):
        """检查 id 范围和划分互斥"""
        for name in SPLITS:
            arr = self.split(name)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise IngestIntegrityError(f"{self.name}/{name}: 三元组数组形状错误 {arr.shape}")
            if len(arr) == 0:
                continue
            if arr.min() < 0:
                raise IngestIntegrityError(f"{self.name}/{name}: 存在负 id")
            if arr[:, [0, 2]].max() >= self.num_entities:
                raise IngestIntegrityError(f"{self.name}/{name}: 实体 id 越界")
            if arr[:, 1].max() >= self.num_relations:
                raise IngestIntegrityError(f"{self.name}/{name}: 关系 id 越界")
        sets = {name: self.triple_set(name) for name in SPLITS}
        for i, a in enumerate(SPLITS):
            for b in SPLITS[i + 1:]:
                overlap = sets[a] & sets[b]
                if overlap:
                    raise IngestIntegrityError(
                        f"{self.name}: {a} 与 {b} 划分重叠 {len(overlap)} 个三元组")


@dataclass(eq=False)
class FusedKg:
    """融合图：所有 KG 的实体、关系和训练三元组重新编号到全局 id 空间

    实体 id 按 KG 顺序拼接；关系 id 在非共享模式下按 KG 拼接，共享模式下所有 KG
    使用同一个关系空间；最后一个关系 id 保留给 ALIGN。
    """
    entity_offset: Tuple[int, ...]          # 长度 m+1 的累积偏移
    relation_offset: Tuple[int, ...]        # 每个 KG 的关系偏移
    relation_counts: Tuple[int, ...]        # 每个 KG 的关系数
    align_relation: int                     # 保留的 ALIGN 关系 id
    triples: np.ndarray                     # (n, 3) 全局 id
    triple_kg: np.ndarray                   # (n,) 每个三元组所属 KG
    align_edges: np.ndarray                 # (a, 2) 全局 id，每个对齐只存一次
    shared_relations: bool = False

    @property
    def num_kgs(self) -> int:
        return len(self.entity_offset) - 1

    @property
    def num_entities(self) -> int:
        return self.entity_offset[-1]

    @property
    def num_relations(self) -> int:
        """包含 ALIGN 在内的关系数"""
        return self.align_relation + 1

    def to_global(self, ref: EntityRef) -> int:
        """EntityRef -> 全局实体 id"""
        if not 0 <= ref.kg_id < self.num_kgs:
            raise InvariantViolation(f"未知 KG: {ref}")
        size = self.entity_offset[ref.kg_id + 1] - self.entity_offset[ref.kg_id]
        if not 0 <= ref.local_id < size:
            raise InvariantViolation(f"实体越界: {ref}")
        return self.entity_offset[ref.kg_id] + ref.local_id

    def to_local(self, global_id: int) -> EntityRef:
        """全局实体 id -> EntityRef"""
        if not 0 <= global_id < self.num_entities:
            raise InvariantViolation(f"全局实体 id 越界: {global_id}")
        kg_id = int(np.searchsorted(self.entity_offset, global_id, side="right")) - 1
        return EntityRef(kg_id, int(global_id - self.entity_offset[kg_id]))

    def relation_to_global(self, ref: RelationRef) -> int:
        if not 0 <= ref.kg_id < self.num_kgs or not 0 <= ref.local_id < self.relation_counts[ref.kg_id]:
            raise InvariantViolation(f"关系越界: {ref}")
        return self.relation_offset[ref.kg_id] + ref.local_id

    def entity_ids(self, kg_id: int) -> np.ndarray:
        """某个 KG 全部实体的全局 id"""
        return np.arange(self.entity_offset[kg_id], self.entity_offset[kg_id + 1], dtype=np.int64)

    def relation_ids(self, kg_id: int) -> np.ndarray:
        """某个 KG 全部关系的全局 id"""
        start = self.relation_offset[kg_id]
        return np.arange(start, start + self.relation_counts[kg_id], dtype=np.int64)

    def localize_triples(self, kg_id: int, local: np.ndarray) -> np.ndarray:
        """把某个 KG 的本地三元组数组映射到全局 id"""
        out = np.array(local, dtype=np.int64, copy=True).reshape(-1, 3)
        out[:, [0, 2]] += self.entity_offset[kg_id]
        out[:, 1] += self.relation_offset[kg_id]
        return out


@dataclass(eq=False)
class MultiKgStore:
    """多知识图谱存储：m 个 KG、种子对齐集合以及可选的融合图"""
    name: str
    kgs: List[KgData]
    alignments: FrozenSet[SeedAlignment] = frozenset()
    shared_relation_schema: bool = False
    fused: Optional[FusedKg] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def num_kgs(self) -> int:
        return len(self.kgs)

    def kg_by_name(self, name: str) -> KgData:
        for kg in self.kgs:
            if kg.name == name:
                return kg
        raise KeyError(f"未知 KG: {name}")

    def sorted_alignments(self) -> List[SeedAlignment]:
        """按规范顺序排序后的对齐列表"""
        return sorted(self.alignments)

    def aligned_entities(self) -> Set[EntityRef]:
        """出现在任何对齐中的实体"""
        ents = set()
        for a in self.alignments:
            ents.add(a.left)
            ents.add(a.right)
        return ents

    def counterparts(self) -> Dict[EntityRef, List[EntityRef]]:
        """实体 -> 直接对齐的对应实体列表（有序）"""
        mapping: Dict[EntityRef, List[EntityRef]] = {}
        for a in self.sorted_alignments():
            mapping.setdefault(a.left, []).append(a.right)
            mapping.setdefault(a.right, []).append(a.left)
        return mapping

    def check_alignments(self, alignments: Optional[Iterable[SeedAlignment]] = None):
        """检查对齐引用的实体是否在范围内"""
        for a in (self.alignments if alignments is None else alignments):
            for ref in (a.left, a.right):
                if not 0 <= ref.kg_id < self.num_kgs:
                    raise IngestIntegrityError(f"对齐引用了未知 KG: {ref}")
                if not 0 <= ref.local_id < self.kgs[ref.kg_id].num_entities:
                    raise IngestIntegrityError(f"对齐引用的实体越界: {ref}")

    def validate(self):
        """检查全部存储不变量"""
        names = [kg.name for kg in self.kgs]
        if len(set(names)) != len(names):
            raise IngestIntegrityError(f"KG 名称重复: {names}")
        for idx, kg in enumerate(self.kgs):
            if kg.kg_id != idx:
                raise IngestIntegrityError(f"KG {kg.name} 的 kg_id={kg.kg_id} 与位置 {idx} 不符")
            kg.validate()
        self.check_alignments()
        if self.shared_relation_schema and self.kgs:
            counts = {kg.num_relations for kg in self.kgs}
            if len(counts) != 1:
                raise IngestIntegrityError(f"共享关系模式下各 KG 关系数不一致: {sorted(counts)}")
