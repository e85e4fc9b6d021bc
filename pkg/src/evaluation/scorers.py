"""
打分器

打分器把某个 KG 的本地查询映射到模型自己的 id 空间，返回该 KG 全部候选实体的
goodness 矩阵。个体模型直接使用本地 id；融合模型通过 FusedKg 的双射映射到全局 id；
集成打分器把两者逐元素相加。
"""
from typing import Dict, Optional

import numpy as np
import torch

from ..encoder import (
    EncodedGraph, GraphAdjacency, KgcModel, ScoreFn, build_fused_graph, build_kg_graph,
    score_heads, score_tails,
)
from ..errors import InvariantViolation
from ..models import FusedKg, MultiKgStore


def encode_snapshot(model: KgcModel, graph: GraphAdjacency) -> EncodedGraph:
    """编码一次并丢弃计算图，作为只读快照供评估线程共享"""
    with torch.no_grad():
        return model.encode(graph).detach()


class Scorer:
    """打分器基类"""
    name = ""

    @property
    def num_candidates(self) -> int:
        raise NotImplementedError

    def score_tails(self, heads: np.ndarray, rels: np.ndarray) -> np.ndarray:
        """(h, r, ?) 查询，返回 (B, |E_i|)"""
        raise NotImplementedError

    def score_heads(self, rels: np.ndarray, tails: np.ndarray) -> np.ndarray:
        """(?, r, t) 查询，返回 (B, |E_i|)"""
        raise NotImplementedError


class IndividualScorer(Scorer):
    """个体模型 M_i 在自己 KG 上的打分器"""

    def __init__(self, enc: EncodedGraph, score_fn, name: str = ""):
        self.enc = enc
        self.score_fn = ScoreFn(score_fn)
        self.name = name
        self._candidates = torch.arange(enc.num_entities)

    @classmethod
    def from_model(cls, model: KgcModel, graph: GraphAdjacency) -> "IndividualScorer":
        return cls(encode_snapshot(model, graph), model.score_fn, model.name)

    @property
    def num_candidates(self) -> int:
        return self.enc.num_entities

    def score_tails(self, heads, rels):
        return score_tails(self.score_fn, self.enc, heads, rels, self._candidates).numpy()

    def score_heads(self, rels, tails):
        return score_heads(self.score_fn, self.enc, rels, tails, self._candidates).numpy()


class FusedScorer(Scorer):
    """融合模型 M_f 限制在 KG_i 候选实体上的打分器"""

    def __init__(self, enc: EncodedGraph, score_fn, fused: FusedKg, kg_id: int, name: str = ""):
        if enc.num_entities != fused.num_entities:
            raise InvariantViolation("融合模型实体数与融合图不一致")
        self.enc = enc
        self.score_fn = ScoreFn(score_fn)
        self.fused = fused
        self.kg_id = kg_id
        self.name = name
        self._entity_offset = fused.entity_offset[kg_id]
        self._relation_offset = fused.relation_offset[kg_id]
        self._candidates = torch.as_tensor(fused.entity_ids(kg_id))

    @property
    def num_candidates(self) -> int:
        return int(self._candidates.numel())

    def score_tails(self, heads, rels):
        return score_tails(self.score_fn, self.enc, np.asarray(heads) + self._entity_offset,
                           np.asarray(rels) + self._relation_offset, self._candidates).numpy()

    def score_heads(self, rels, tails):
        return score_heads(self.score_fn, self.enc, np.asarray(rels) + self._relation_offset,
                           np.asarray(tails) + self._entity_offset, self._candidates).numpy()


class EnsembleScorer(Scorer):
    """goodness_i(t) + goodness_f(map(t))"""

    def __init__(self, individual: Scorer, fused: Scorer, name: str = "ensemble"):
        if individual.num_candidates != fused.num_candidates:
            raise InvariantViolation(
                f"集成打分器候选数不一致: {individual.num_candidates} vs {fused.num_candidates}")
        self.individual = individual
        self.fused = fused
        self.name = name

    @property
    def num_candidates(self) -> int:
        return self.individual.num_candidates

    def score_tails(self, heads, rels):
        return self.individual.score_tails(heads, rels) + self.fused.score_tails(heads, rels)

    def score_heads(self, rels, tails):
        return self.individual.score_heads(rels, tails) + self.fused.score_heads(rels, tails)


def ensemble_scorer(individual: Scorer, fused: Scorer) -> EnsembleScorer:
    return EnsembleScorer(individual, fused)


def individual_scorers(models: Dict[str, KgcModel], store: MultiKgStore,
                       graphs: Optional[Dict[str, GraphAdjacency]] = None) -> Dict[str, Scorer]:
    """每个 KG 一个个体模型打分器"""
    scorers = {}
    for kg in store.kgs:
        if kg.name not in models:
            continue
        graph = graphs[kg.name] if graphs else build_kg_graph(kg)
        scorers[kg.name] = IndividualScorer.from_model(models[kg.name], graph)
    return scorers


def fused_scorers(model: KgcModel, store: MultiKgStore, fused: FusedKg,
                  graph: Optional[GraphAdjacency] = None,
                  fused_message: str = "augmented") -> Dict[str, Scorer]:
    """融合模型在每个 KG 上的打分器（只编码一次）"""
    if graph is None:
        graph = build_fused_graph(fused, fused_message)
    enc = encode_snapshot(model, graph)
    return {kg.name: FusedScorer(enc, model.score_fn, fused, kg.kg_id, model.name) for kg in store.kgs}


def ensemble_scorers(individual: Dict[str, Scorer], fused: Dict[str, Scorer]) -> Dict[str, Scorer]:
    return {name: ensemble_scorer(individual[name], fused[name]) for name in individual if name in fused}
