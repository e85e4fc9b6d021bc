"""
测试用的小型数据构造函数
"""
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.models import EntityRef, KgData, MultiKgStore, SeedAlignment, TrainConfig


def triples_array(rows: Iterable[Sequence[int]]) -> np.ndarray:
    return np.array(list(rows), dtype=np.int64).reshape(-1, 3)


def make_kg(name: str, kg_id: int, n_entities: int, n_relations: int, train=(), valid=(), test=(),
            relation_names: Optional[List[str]] = None) -> KgData:
    return KgData(
        name=name,
        kg_id=kg_id,
        entity_names=[f"{name}_e{i}" for i in range(n_entities)],
        relation_names=relation_names or [f"r{j}" for j in range(n_relations)],
        train=triples_array(train),
        valid=triples_array(valid),
        test=triples_array(test),
    )


def make_store(kgs: List[KgData], alignments: Iterable[Tuple[int, int, int, int]] = (),
               shared: bool = False, name: str = "toy") -> MultiKgStore:
    """alignments 中每项为 (kg_a, local_a, kg_b, local_b)"""
    pairs = frozenset(SeedAlignment.canonical(EntityRef(a, x), EntityRef(b, y)) for a, x, b, y in alignments)
    store = MultiKgStore(name=name, kgs=kgs, alignments=pairs, shared_relation_schema=shared)
    store.validate()
    return store


def toy_store(shared: bool = True) -> MultiKgStore:
    """两个 6 实体、2 关系的 KG，带三个对齐"""
    kg0 = make_kg("en", 0, 6, 2,
                  train=[(0, 0, 1), (1, 1, 2), (2, 0, 3), (3, 1, 4), (4, 0, 5), (5, 1, 0)],
                  valid=[(0, 1, 3)], test=[(1, 0, 4)])
    kg1 = make_kg("fr", 1, 6, 2,
                  train=[(0, 0, 2), (2, 1, 4), (4, 0, 1), (1, 1, 3), (3, 0, 5)],
                  valid=[(5, 0, 0)], test=[(2, 0, 0)])
    return make_store([kg0, kg1], alignments=[(0, 0, 1, 0), (0, 1, 1, 2), (0, 3, 1, 4)], shared=shared)


def random_kg(rng: np.random.Generator, name: str, kg_id: int, n_entities: int, n_relations: int,
              n_triples: int, held_out: float = 0.2) -> KgData:
    """随机、互不重复的三元组，按比例切出 valid/test"""
    seen = set()
    rows = []
    while len(rows) < n_triples:
        key = (int(rng.integers(n_entities)), int(rng.integers(n_relations)), int(rng.integers(n_entities)))
        if key not in seen:
            seen.add(key)
            rows.append(key)
    n_held = int(len(rows) * held_out)
    half = n_held // 2
    return make_kg(name, kg_id, n_entities, n_relations,
                   train=rows[n_held:], valid=rows[:half], test=rows[half:n_held])


def random_store(rng: np.random.Generator, n_kgs: int = 2, max_entities: int = 30, n_relations: int = 3,
                 n_alignments: int = 8, shared: bool = True) -> MultiKgStore:
    """随机小型多 KG 存储（实体数 ≤ max_entities）"""
    kgs = []
    for k in range(n_kgs):
        n_entities = int(rng.integers(5, max_entities + 1))
        capacity = n_entities * n_entities * n_relations
        n_triples = int(min(capacity // 2, rng.integers(10, 4 * n_entities)))
        kgs.append(random_kg(rng, f"kg{k}", k, n_entities, n_relations, n_triples))
    alignments = set()
    for _ in range(n_alignments):
        a, b = rng.choice(n_kgs, size=2, replace=False)
        x = int(rng.integers(kgs[a].num_entities))
        y = int(rng.integers(kgs[b].num_entities))
        alignments.add((int(a), x, int(b), y))
    return make_store(kgs, alignments, shared=shared, name="random")


def small_config(**overrides) -> TrainConfig:
    """桌面规模的快速训练配置"""
    values = dict(dim=8, epochs_stage1=2, epochs_stage2=2, batch_size=8, neg_samples=4, top_k=3,
                  eval_every=1, patience=5, lr=0.01, seed=0)
    values.update(overrides)
    return TrainConfig(**values)
