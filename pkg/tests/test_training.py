from __future__ import annotations

import numpy as np
import pytest
import torch
from torch import nn

from src.encoder import KgcModel, build_fused_graph, build_kg_graph, encode, encode_fused, score_triples
from src.errors import NumericError, PreconditionError
from src.kg import build_fused_kg
from src.models import GateState, Slot, Triple
from src.training import (
    MetricsLog, NegativeSampler, fused_from, grad_step, gradient_check, make_optimizer, margin_loss,
    mutual_distillation, sample_negatives,
)
from tests.helpers import make_kg, make_store, random_kg


# ---------------------------------------------------------------- 负采样

def test_two_entity_kg_forces_the_only_negatives():
    kg = make_kg("k", 0, 2, 1, train=[(0, 0, 1)])
    negatives = sample_negatives(Triple.from_ids(0, 0, 0, 1), kg, np.random.default_rng(0), 20)
    assert len(negatives) == 20
    for neg in negatives:
        expected = (1, 0, 1) if neg.corrupted_slot is Slot.HEAD else (0, 0, 0)
        assert neg.corrupted.as_ids() == expected


def test_requested_count_is_honored():
    kg = random_kg(np.random.default_rng(1), "k", 0, 20, 2, 40)
    triple = Triple.from_ids(0, *kg.train[0].tolist())
    assert len(sample_negatives(triple, kg, np.random.default_rng(1), 5)) == 5


def test_negatives_avoid_known_positives():
    kg = random_kg(np.random.default_rng(2), "k", 0, 30, 3, 120, held_out=0.0)
    sampler = NegativeSampler.for_kg(kg)
    neg, _ = sampler.sample(kg.train, np.random.default_rng(2), 8)
    known = kg.triple_set("train")
    assert neg.shape == (len(kg.train), 8, 3)
    assert not any(tuple(row) in known for row in neg.reshape(-1, 3).tolist())
    assert sampler.exhausted == 0


def test_corrupted_slot_is_uniform():
    kg = random_kg(np.random.default_rng(3), "k", 0, 50, 2, 60)
    _, heads = NegativeSampler.for_kg(kg).sample(kg.train[:1], np.random.default_rng(3), 10_000)
    # 3σ，σ = sqrt(0.25 / 10000)
    assert abs(heads.mean() - 0.5) < 3 * 0.005


def test_only_the_corrupted_slot_changes():
    kg = random_kg(np.random.default_rng(4), "k", 0, 25, 3, 50)
    neg, heads = NegativeSampler.for_kg(kg).sample(kg.train, np.random.default_rng(4), 6)
    pos = np.repeat(kg.train[:, None, :], 6, axis=1)
    assert np.array_equal(neg[..., 1], pos[..., 1])
    assert np.array_equal(neg[..., 2][heads], pos[..., 2][heads])
    assert np.array_equal(neg[..., 0][~heads], pos[..., 0][~heads])


def test_fused_sampler_stays_inside_owner_kg():
    kgs = [random_kg(np.random.default_rng(5), "a", 0, 8, 2, 20),
           random_kg(np.random.default_rng(6), "b", 1, 12, 2, 20)]
    fused = build_fused_kg(make_store(kgs, alignments=[(0, 0, 1, 0)]))
    offsets = np.asarray(fused.entity_offset)
    low, high = offsets[fused.triple_kg], offsets[fused.triple_kg + 1]
    sampler = NegativeSampler(fused.triples, fused.num_entities, fused.num_relations, low, high)
    neg, heads = sampler.sample(fused.triples, np.random.default_rng(7), 5)
    replaced = np.where(heads, neg[..., 0], neg[..., 2])
    assert ((replaced >= low[:, None]) & (replaced < high[:, None])).all()


def test_single_entity_kg_is_rejected():
    kg = make_kg("k", 0, 1, 1, train=[(0, 0, 0)])
    with pytest.raises(PreconditionError):
        sample_negatives(Triple.from_ids(0, 0, 0, 0), kg, np.random.default_rng(0), 3)


# ---------------------------------------------------------------- 优化器

class _Quadratic(nn.Module):
    def __init__(self):
        super().__init__()
        self.p = nn.Parameter(torch.tensor([1.0, -2.0], dtype=torch.float64))


def test_zero_gradient_leaves_parameters_unchanged():
    model = KgcModel(4, 1, dim=3, seed=1)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    optimizer = make_optimizer(model, lr=0.1)
    grad_step(model, (model.entity_emb * 0.0).sum(), optimizer)
    for key, value in model.state_dict().items():
        assert torch.equal(value, before[key]), key


def test_step_moves_toward_minimum():
    model = _Quadratic()
    optimizer = make_optimizer(model, lr=0.1)
    before = model.p.detach().abs().clone()
    grad_step(model, (model.p ** 2).sum(), optimizer)
    assert (model.p.detach().abs() < before).all()


def test_non_finite_loss_raises():
    model = _Quadratic()
    with pytest.raises(NumericError):
        grad_step(model, model.p.sum() * float("nan"), make_optimizer(model, lr=0.1), "quad")


# ---------------------------------------------------------------- 梯度检查

GAMMA = 1.0
ALPHA = 0.5
TOP_K = 3


def _transe_diffs(enc, triples, entities, relations) -> torch.Tensor:
    """TransE-L1 在给定三元组的三个任务全部候选上的逐维差值 (h + r) - t"""
    ent, rel = enc.entity_out, enc.relation_out
    h, r, t = (torch.as_tensor(triples[:, j]) for j in range(3))
    e = ent[torch.as_tensor(entities)].unsqueeze(0)
    q = rel[torch.as_tensor(relations)].unsqueeze(0)
    tails = (ent[h] + rel[r]).unsqueeze(1) - e
    heads = (e + rel[r].unsqueeze(1)) - ent[t].unsqueeze(1)
    rels = (ent[h].unsqueeze(1) + q) - ent[t].unsqueeze(1)
    return torch.cat([tails.reshape(-1), heads.reshape(-1), rels.reshape(-1)])


def _margin_terms(enc, triples, neg):
    pos = score_triples("transe_l1", enc, triples[:, 0], triples[:, 1], triples[:, 2])
    negs = score_triples("transe_l1", enc, neg[..., 0], neg[..., 1], neg[..., 2])
    return pos, negs


def _check_setup():
    rng = np.random.default_rng(11)
    kgs = [random_kg(rng, "a", 0, 10, 3, 24, held_out=0.0), random_kg(rng, "b", 1, 10, 3, 24, held_out=0.0)]
    store = make_store(kgs, alignments=[(0, 0, 1, 0), (0, 3, 1, 5), (0, 7, 1, 2)], shared=True)
    fused = build_fused_kg(store)
    model_i = KgcModel(10, 3, dim=8, seed=21)
    model_f = KgcModel(fused.num_entities, fused.num_relations, dim=8, with_align=True, seed=22)
    return store, fused, model_i, model_f, rng


def _assert_small(errors):
    assert errors
    for name, err in errors.items():
        assert err < 1e-3, (name, err)


def test_gradient_check_individual_encoder():
    store, fused, model_i, model_f, rng = _check_setup()
    kg = store.kgs[0]
    graph_i = build_kg_graph(kg)
    enc_f = encode_fused(model_f, build_fused_graph(fused)).detach()
    batch = kg.train[:4]
    neg, _ = NegativeSampler.for_kg(kg).sample(batch, rng, 3)
    gate = GateState(teach_i_to_f=False, teach_f_to_i=True)

    def loss_fn():
        enc = encode(model_i, graph_i)
        pos, negs = _margin_terms(enc, batch, neg)
        kd_i, _ = mutual_distillation(enc, enc_f, batch, 0, fused, "transe_l1", TOP_K, gate)
        return margin_loss(pos, negs, GAMMA) + ALPHA * kd_i

    def kink_fn():
        enc = encode(model_i, graph_i)
        pos, negs = _margin_terms(enc, batch, neg)
        hinge = (negs - pos.unsqueeze(-1) + GAMMA).reshape(-1)
        return torch.cat([_transe_diffs(enc, batch, np.arange(10), np.arange(3)), hinge])

    errors = gradient_check(loss_fn, dict(model_i.named_parameters()), h=1e-4, floor=1e-5, kink_fn=kink_fn)
    assert {"entity_emb", "relation_emb", "layers.0.w_loop"} <= set(errors)
    _assert_small(errors)


def test_gradient_check_fused_encoder():
    store, fused, model_i, model_f, rng = _check_setup()
    kg = store.kgs[0]
    graph_f = build_fused_graph(fused)
    enc_i = encode(model_i, build_kg_graph(kg)).detach()
    batch_i = kg.train[:4]
    batch_f = fused.triples[20:24]
    offsets = np.asarray(fused.entity_offset)
    owner = fused.triple_kg
    sampler = NegativeSampler(fused.triples, fused.num_entities, fused.num_relations,
                              offsets[owner], offsets[owner + 1])
    neg, _ = sampler.sample(batch_f, rng, 3, index=np.arange(20, 24))
    gate = GateState(teach_i_to_f=True, teach_f_to_i=False)
    all_entities = np.arange(fused.num_entities)
    all_relations = np.arange(fused.num_relations)
    global_batch = fused.localize_triples(0, batch_i)

    def loss_fn():
        enc = encode_fused(model_f, graph_f)
        pos, negs = _margin_terms(enc, batch_f, neg)
        _, kd_f = mutual_distillation(enc_i, enc, batch_i, 0, fused, "transe_l1", TOP_K, gate)
        return margin_loss(pos, negs, GAMMA) + ALPHA * kd_f

    def kink_fn():
        enc = encode_fused(model_f, graph_f)
        pos, negs = _margin_terms(enc, batch_f, neg)
        hinge = (negs - pos.unsqueeze(-1) + GAMMA).reshape(-1)
        return torch.cat([_transe_diffs(enc, batch_f, all_entities, all_relations),
                          _transe_diffs(enc, global_batch, all_entities, all_relations), hinge])

    errors = gradient_check(loss_fn, dict(model_f.named_parameters()), h=1e-4, floor=1e-5, kink_fn=kink_fn)
    assert "layers.0.w_align" in errors
    _assert_small(errors)


def test_gradient_check_detects_a_wrong_gradient():
    p = torch.tensor([0.3, -0.7], dtype=torch.float64, requires_grad=True)

    class _Wrong(torch.autograd.Function):
        @staticmethod
        def forward(ctx, x):
            ctx.save_for_backward(x)
            return (x ** 2).sum()

        @staticmethod
        def backward(ctx, grad):
            (x,) = ctx.saved_tensors
            return grad * 3 * x

    errors = gradient_check(lambda: _Wrong.apply(p), {"p": p})
    assert errors["p"] > 0.1


# ---------------------------------------------------------------- 指标日志

def test_metrics_log_rows_and_file(tmp_path):
    log = MetricsLog(tmp_path / "metrics.tsv")
    log.record(1, "en", 0.5, None, None)
    log.record(2, fused_from("en"), None, 0.125, None)
    lines = (tmp_path / "metrics.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epoch\tmodel\tloss_T\tloss_D\tval_mrr"
    assert lines[1] == "1\ten\t0.50000000\tNA\tNA"
    assert lines[2] == "2\tfused<-en\tNA\t0.12500000\tNA"
    assert log.column("loss_D", model="fused<-en") == ["0.12500000"]


def test_metrics_log_in_memory():
    log = MetricsLog()
    log.record(1, "fused", 1.0, 0.0, 0.25)
    assert log.rows == [["1", "fused", "1.00000000", "0.00000000", "0.25000000"]]
