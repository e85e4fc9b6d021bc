"""
融合图构建

把多个 KG 的实体、关系和训练三元组重新编号到一个全局空间，并把种子对齐作为
保留的 ALIGN 关系边加入。只有训练三元组进入融合图。
"""
import logging
from typing import List

import numpy as np

from ..errors import IngestIntegrityError, PreconditionError
from ..models import FusedKg, MultiKgStore

logger = logging.getLogger(__name__)


def build_fused_kg(store: MultiKgStore) -> FusedKg:
    """构建融合图

    Raises:
        PreconditionError: KG 少于 2 个
        IngestIntegrityError: 对齐引用越界实体
    """
    if store.num_kgs < 2:
        raise PreconditionError(f"构建融合图至少需要 2 个 KG，当前 {store.num_kgs} 个")
    store.check_alignments()

    # 实体偏移
    entity_offset = [0]
    for kg in store.kgs:
        entity_offset.append(entity_offset[-1] + kg.num_entities)

    # 关系偏移：共享模式下所有 KG 落在同一个关系空间
    relation_counts = tuple(kg.num_relations for kg in store.kgs)
    if store.shared_relation_schema:
        if len(set(relation_counts)) != 1:
            raise IngestIntegrityError(f"共享关系模式下各 KG 关系数不一致: {relation_counts}")
        relation_offset = tuple(0 for _ in store.kgs)
        align_relation = relation_counts[0]
    else:
        offsets: List[int] = [0]
        for count in relation_counts[:-1]:
            offsets.append(offsets[-1] + count)
        relation_offset = tuple(offsets)
        align_relation = sum(relation_counts)

    # 训练三元组重新编号
    parts, owners = [], []
    for kg in store.kgs:
        local = kg.train.reshape(-1, 3).astype(np.int64)
        glob = local.copy()
        glob[:, [0, 2]] += entity_offset[kg.kg_id]
        glob[:, 1] += relation_offset[kg.kg_id]
        parts.append(glob)
        owners.append(np.full(len(glob), kg.kg_id, dtype=np.int64))
    triples = np.concatenate(parts, axis=0) if parts else np.zeros((0, 3), dtype=np.int64)
    triple_kg = np.concatenate(owners) if owners else np.zeros(0, dtype=np.int64)

    # 对齐边，每个对齐只存一次，方向在消息传递时展开
    edges = [
        (entity_offset[a.left.kg_id] + a.left.local_id, entity_offset[a.right.kg_id] + a.right.local_id)
        for a in store.sorted_alignments()
    ]
    align_edges = np.array(edges, dtype=np.int64).reshape(-1, 2)

    fused = FusedKg(
        entity_offset=tuple(entity_offset),
        relation_offset=relation_offset,
        relation_counts=relation_counts,
        align_relation=align_relation,
        triples=triples,
        triple_kg=triple_kg,
        align_edges=align_edges,
        shared_relations=store.shared_relation_schema,
    )
    logger.debug("融合图: |E_f|=%d |R_f|=%d |T_f|=%d |S_align|=%d",
                 fused.num_entities, fused.num_relations, len(triples), len(align_edges))
    return fused
