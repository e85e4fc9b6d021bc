from __future__ import annotations

import itertools

import numpy as np
import pytest

from src.errors import IngestIntegrityError, PreconditionError, SchemaError
from src.kg import (
    alignment_closure, alignment_component_report, augment_store, build_fused_kg,
    parameter_swap_triples,
)
from src.models import EntityRef, KgData, SeedAlignment, Triple
from tests.helpers import make_kg, make_store, random_store, toy_store


def _brute_force_swap(store) -> set:
    """逐个枚举 (对齐或自身, 训练三元组, 对齐或自身) 的组合"""
    directed = []
    for a in store.alignments:
        directed.append((a.left, a.right))
        directed.append((a.right, a.left))
    known = [kg.known_triples() for kg in store.kgs]
    out = set()
    for kg in store.kgs:
        for h, r, t in kg.train.tolist():
            head, tail = EntityRef(kg.kg_id, h), EntityRef(kg.kg_id, t)
            heads = [head] + [dst for src, dst in directed if src == head]
            tails = [tail] + [dst for src, dst in directed if src == tail]
            for a, d in itertools.product(heads, tails):
                if a == head and d == tail:
                    continue
                if a.kg_id != d.kg_id:
                    continue
                key = (a.local_id, r, d.local_id)
                if key not in known[a.kg_id]:
                    out.add(Triple.from_ids(a.kg_id, *key))
    return out


def _union_find_closure(store) -> set:
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in store.alignments:
        parent[find(a.left)] = find(a.right)
    groups = {}
    for ref in list(parent):
        groups.setdefault(find(ref), []).append(ref)
    out = set()
    for members in groups.values():
        for a, b in itertools.combinations(members, 2):
            if a.kg_id != b.kg_id:
                pair = SeedAlignment.canonical(a, b)
                if pair not in store.alignments:
                    out.add(pair)
    return out


# ---------------------------------------------------------------- 融合图

def test_fused_counts_and_offsets():
    kg0 = make_kg("a", 0, 3, 2, train=[(0, 0, 1), (1, 1, 2), (2, 0, 0), (0, 1, 2), (1, 0, 0)])
    kg1 = make_kg("b", 1, 4, 3, train=[(0, 0, 1), (1, 1, 2), (2, 2, 3), (3, 0, 0), (0, 2, 2), (1, 0, 3)])
    store = make_store([kg0, kg1], alignments=[(0, 0, 1, 0), (0, 2, 1, 3)])
    fused = build_fused_kg(store)
    assert fused.num_entities == 7
    assert fused.num_relations == 2 + 3 + 1
    assert len(fused.triples) == 11
    assert len(fused.align_edges) == 2
    assert fused.align_relation == 5
    # KG b 的三元组整体平移
    assert fused.triples[5].tolist() == [3, 2, 4]


def test_fused_excludes_held_out_triples():
    store = toy_store()
    fused = build_fused_kg(store)
    assert len(fused.triples) == sum(len(kg.train) for kg in store.kgs)


def test_fused_bijection_round_trip():
    store = random_store(np.random.default_rng(3), n_kgs=3)
    fused = build_fused_kg(store)
    for g in range(fused.num_entities):
        assert fused.to_global(fused.to_local(g)) == g
    for kg in store.kgs:
        for local in range(kg.num_entities):
            ref = EntityRef(kg.kg_id, local)
            assert fused.to_local(fused.to_global(ref)) == ref


def test_fused_shared_relation_space():
    store = toy_store(shared=True)
    fused = build_fused_kg(store)
    assert fused.relation_offset == (0, 0)
    assert fused.num_relations == 3


def test_fused_requires_two_kgs():
    store = make_store([make_kg("solo", 0, 3, 1, train=[(0, 0, 1)])])
    with pytest.raises(PreconditionError):
        build_fused_kg(store)


def test_fused_rejects_out_of_range_alignment():
    kg0 = make_kg("a", 0, 3, 1, train=[(0, 0, 1)])
    kg1 = make_kg("b", 1, 3, 1, train=[(0, 0, 1)])
    store = make_store([kg0, kg1])
    store.alignments = frozenset({SeedAlignment(EntityRef(0, 0), EntityRef(1, 9))})
    with pytest.raises(IngestIntegrityError):
        build_fused_kg(store)


# ---------------------------------------------------------------- 参数交换

def test_parameter_swap_both_endpoints_aligned():
    kg0 = make_kg("a", 0, 3, 1, train=[(0, 0, 2)])
    kg1 = make_kg("b", 1, 3, 1, train=[(1, 0, 0)])
    store = make_store([kg0, kg1], alignments=[(0, 0, 1, 1), (0, 2, 1, 2)], shared=True)
    out = parameter_swap_triples(store)
    assert Triple.from_ids(1, 1, 0, 2) in out


def test_parameter_swap_one_sided_keeps_nothing_across_kgs():
    # 只有头实体对齐：尾实体仍在源 KG，两个端点不在同一个目标 KG
    kg0 = make_kg("a", 0, 3, 1, train=[(0, 0, 2)])
    kg1 = make_kg("b", 1, 3, 1)
    store = make_store([kg0, kg1], alignments=[(0, 0, 1, 1)], shared=True)
    assert parameter_swap_triples(store) == set()


def test_parameter_swap_without_alignments():
    store = make_store([make_kg("a", 0, 3, 1, train=[(0, 0, 1)]), make_kg("b", 1, 3, 1)], shared=True)
    assert parameter_swap_triples(store) == set()


def test_parameter_swap_requires_shared_schema():
    with pytest.raises(SchemaError):
        parameter_swap_triples(toy_store(shared=False))


@pytest.mark.parametrize("seed", range(50))
def test_parameter_swap_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    store = random_store(rng, n_kgs=int(rng.integers(2, 4)), max_entities=30,
                         n_alignments=int(rng.integers(0, 15)))
    out = parameter_swap_triples(store)
    assert out == _brute_force_swap(store)
    for triple in out:
        assert triple.as_ids() not in store.kgs[triple.kg_id].known_triples()


# ---------------------------------------------------------------- 对齐传递

def test_closure_three_kgs():
    kgs = [make_kg(f"k{i}", i, 1, 1) for i in range(3)]
    store = make_store(kgs, alignments=[(0, 0, 1, 0), (1, 0, 2, 0)])
    assert alignment_closure(store) == {SeedAlignment(EntityRef(0, 0), EntityRef(2, 0))}


def test_closure_chain_across_four_kgs():
    kgs = [make_kg(f"k{i}", i, 1, 1) for i in range(4)]
    store = make_store(kgs, alignments=[(0, 0, 1, 0), (1, 0, 2, 0), (2, 0, 3, 0)])
    assert len(alignment_closure(store)) == 3


@pytest.mark.parametrize("seed", range(50))
def test_closure_matches_union_find_and_is_idempotent(seed):
    rng = np.random.default_rng(1000 + seed)
    store = random_store(rng, n_kgs=int(rng.integers(2, 5)), max_entities=25,
                         n_alignments=int(rng.integers(1, 40)))
    closure = alignment_closure(store)
    assert closure == _union_find_closure(store)
    augmented = augment_store(store, alignments=closure)
    assert alignment_closure(augmented) == set()


def test_augment_store_leaves_input_untouched():
    store = toy_store()
    train_before = [kg.train.copy() for kg in store.kgs]
    triples = parameter_swap_triples(store)
    augmented = augment_store(store, triples, alignment_closure(store))
    for kg, before in zip(store.kgs, train_before):
        np.testing.assert_array_equal(kg.train, before)
    assert sum(len(kg.train) for kg in augmented.kgs) == sum(len(b) for b in train_before) + len(triples)


# ---------------------------------------------------------------- 连通分量

def test_component_report_disjoint_pairs():
    kgs = [make_kg("a", 0, 3, 1), make_kg("b", 1, 3, 1)]
    store = make_store(kgs, alignments=[(0, 0, 1, 0), (0, 1, 1, 1), (0, 2, 1, 2)])
    report = alignment_component_report(store)
    assert report.histogram == {2: 3}
    assert report.flagged == []


def test_component_report_star():
    kgs = [make_kg(f"k{i}", i, 1, 1) for i in range(5)]
    store = make_store(kgs, alignments=[(0, 0, i, 0) for i in range(1, 5)])
    report = alignment_component_report(store)
    assert report.histogram == {5: 1}
    assert report.same_kg_components == 0


def test_component_report_flags_injected_component():
    n = 1000
    kgs = [make_kg("a", 0, n, 1), make_kg("b", 1, n, 1)]
    # a_i ~ b_i 与 a_{i+1} ~ b_i 串成一条 1000 个实体的链，外加 3 个独立对
    chain = [(0, i, 1, i) for i in range(500)] + [(0, i + 1, 1, i) for i in range(499)]
    extra = [(0, 600 + i, 1, 600 + i) for i in range(3)]
    store = make_store(kgs, alignments=chain + extra)
    report = alignment_component_report(store)
    assert report.histogram == {2: 3, 1000: 1}
    assert len(report.flagged) == 1 and len(report.flagged[0]) == 1000
    assert report.same_kg_components == 1
    assert report.num_entities == len(store.aligned_entities())


def test_component_sizes_sum_to_aligned_entities():
    store = random_store(np.random.default_rng(7), n_kgs=3, n_alignments=30)
    report = alignment_component_report(store, threshold=3)
    assert report.num_entities == len(store.aligned_entities())
    assert all(len(c) > 3 for c in report.flagged)


def test_store_rejects_overlapping_splits():
    kg = KgData(name="x", kg_id=0, entity_names=["a", "b"], relation_names=["r"],
                train=np.array([[0, 0, 1]]), test=np.array([[0, 0, 1]]))
    with pytest.raises(IngestIntegrityError):
        kg.validate()
