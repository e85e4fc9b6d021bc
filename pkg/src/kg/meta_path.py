"""
对齐元路径增强

参数交换：(a ~ b, b -r-> c, c ~ d) => (a -r-> d)
对齐传递：(a ~ b, b ~ c) => (a ~ c)

两个操作都只做一次推导，返回新增部分；重复调用由调用方决定。
"""
import dataclasses
import itertools
import logging
from typing import Dict, Iterable, List, Set

import networkx as nx
import numpy as np

from ..errors import PreconditionError, SchemaError
from ..models import EntityRef, MultiKgStore, SeedAlignment, Triple

logger = logging.getLogger(__name__)


def parameter_swap_triples(store: MultiKgStore) -> Set[Triple]:
    """参数交换生成的新三元组

    每个端点解析为它自身或它的直接对齐实体，只保留两个端点落在同一个目标 KG 中的
    组合；目标 KG 任一划分中已存在的三元组不会输出。
    """
    if not store.shared_relation_schema:
        raise SchemaError("参数交换要求清单声明 shared_relation_schema")
    if not store.alignments:
        return set()

    counterparts = store.counterparts()
    known = [kg.known_triples() for kg in store.kgs]
    emitted: Set[Triple] = set()

    for kg in store.kgs:
        for h, r, t in kg.train:
            head = EntityRef(kg.kg_id, int(h))
            tail = EntityRef(kg.kg_id, int(t))
            heads = counterparts.get(head)
            tails = counterparts.get(tail)
            if not heads and not tails:
                continue
            for a in [head] + (heads or []):
                for d in [tail] + (tails or []):
                    if a.kg_id != d.kg_id or a.kg_id == kg.kg_id:
                        continue
                    key = (a.local_id, int(r), d.local_id)
                    if key in known[a.kg_id]:
                        continue
                    emitted.add(Triple.from_ids(a.kg_id, *key))
    logger.info("参数交换生成 %d 个新三元组", len(emitted))
    return emitted


def alignment_graph(alignments: Iterable[SeedAlignment]) -> nx.Graph:
    """以实体为节点、对齐为边的无向图"""
    graph = nx.Graph()
    for a in alignments:
        graph.add_edge(a.left, a.right)
    return graph


def alignment_closure(store: MultiKgStore) -> Set[SeedAlignment]:
    """对齐关系的传递闭包（只保留跨 KG 对），减去已有对齐"""
    if store.num_kgs < 2:
        raise PreconditionError("对齐传递闭包至少需要 2 个 KG")
    store.check_alignments()
    graph = alignment_graph(store.alignments)
    inferred: Set[SeedAlignment] = set()
    for component in nx.connected_components(graph):
        members = sorted(component)
        for a, b in itertools.combinations(members, 2):
            if a.kg_id == b.kg_id:
                continue
            pair = SeedAlignment.canonical(a, b)
            if pair not in store.alignments:
                inferred.add(pair)
    logger.info("对齐传递推出 %d 个新对齐", len(inferred))
    return inferred


def augment_store(store: MultiKgStore, triples: Iterable[Triple] = (),
                  alignments: Iterable[SeedAlignment] = ()) -> MultiKgStore:
    """返回加入新训练三元组和新对齐后的存储，输入存储不变"""
    extra = list(alignments)
    store.check_alignments(extra)
    by_kg: Dict[int, List[tuple]] = {}
    for triple in sorted(set(triples)):
        by_kg.setdefault(triple.kg_id, []).append(triple.as_ids())

    kgs = []
    for kg in store.kgs:
        added = by_kg.get(kg.kg_id)
        if added:
            train = np.concatenate([kg.train, np.array(added, dtype=np.int64).reshape(-1, 3)], axis=0)
            kgs.append(dataclasses.replace(kg, train=train))
        else:
            kgs.append(kg)
    augmented = dataclasses.replace(
        store,
        kgs=kgs,
        alignments=frozenset(store.alignments) | frozenset(extra),
        fused=None,
        warnings=list(store.warnings),
    )
    augmented.validate()
    return augmented
