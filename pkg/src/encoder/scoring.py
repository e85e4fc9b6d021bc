"""
三元组打分函数

所有排序代码使用统一的 goodness（越大越好）：
TransE 返回负距离，DistMult 返回原始得分。
"""
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import torch


class ScoreFn(str, Enum):
    """解码器类型"""
    TRANSE_L1 = "transe_l1"
    TRANSE_L2 = "transe_l2"
    DISTMULT = "distmult"

    @property
    def is_distance(self) -> bool:
        return self is not ScoreFn.DISTMULT


@dataclass
class EncodedGraph:
    """编码器输出"""
    entity_out: torch.Tensor            # (|E|, d)
    relation_out: torch.Tensor          # (2|R|, d)，后半部分为逆关系

    @property
    def num_entities(self) -> int:
        return self.entity_out.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relation_out.shape[0] // 2

    def detach(self) -> "EncodedGraph":
        return EncodedGraph(self.entity_out.detach(), self.relation_out.detach())


def _goodness(fn: ScoreFn, h: torch.Tensor, r: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
    # 固定运算顺序 (h + r) - t 与 (h * r) * t，批量与逐个打分结果一致
    if fn is ScoreFn.DISTMULT:
        return ((h * r) * t).sum(dim=-1)
    diff = (h + r) - t
    if fn is ScoreFn.TRANSE_L1:
        return -diff.abs().sum(dim=-1)
    return -torch.linalg.vector_norm(diff, ord=2, dim=-1)


def score(fn, h: torch.Tensor, r: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
    """单个三元组的 goodness"""
    return _goodness(ScoreFn(fn), h, r, t)


def _ids(ids) -> torch.Tensor:
    return torch.as_tensor(ids, dtype=torch.long)


def score_triples(fn, enc: EncodedGraph, heads, rels, tails) -> torch.Tensor:
    """逐元素打分，id 张量可以是任意形状"""
    return _goodness(ScoreFn(fn), enc.entity_out[_ids(heads)], enc.relation_out[_ids(rels)],
                     enc.entity_out[_ids(tails)])


def score_tails(fn, enc: EncodedGraph, heads, rels, candidates) -> torch.Tensor:
    """(h, r, ?) 查询，返回 (B, C)"""
    h = enc.entity_out[_ids(heads)].unsqueeze(1)
    r = enc.relation_out[_ids(rels)].unsqueeze(1)
    c = enc.entity_out[_ids(candidates)].unsqueeze(0)
    return _goodness(ScoreFn(fn), h, r, c)


def score_heads(fn, enc: EncodedGraph, rels, tails, candidates) -> torch.Tensor:
    """(?, r, t) 查询，返回 (B, C)"""
    c = enc.entity_out[_ids(candidates)].unsqueeze(0)
    r = enc.relation_out[_ids(rels)].unsqueeze(1)
    t = enc.entity_out[_ids(tails)].unsqueeze(1)
    return _goodness(ScoreFn(fn), c, r, t)


def score_relations(fn, enc: EncodedGraph, heads, tails, candidates) -> torch.Tensor:
    """(h, ?, t) 查询，返回 (B, C)"""
    h = enc.entity_out[_ids(heads)].unsqueeze(1)
    c = enc.relation_out[_ids(candidates)].unsqueeze(0)
    t = enc.entity_out[_ids(tails)].unsqueeze(1)
    return _goodness(ScoreFn(fn), h, c, t)


def score_batch(fn, enc: EncodedGraph, query: Tuple[int, int], candidates: Sequence[int],
                slot: str = "tail") -> torch.Tensor:
    """对一个查询的全部候选打分

    slot=tail: query=(head, relation)；slot=head: query=(relation, tail)；
    slot=relation: query=(head, tail)
    """
    a, b = query
    if slot == "tail":
        return score_tails(fn, enc, [a], [b], candidates)[0]
    if slot == "head":
        return score_heads(fn, enc, [a], [b], candidates)[0]
    if slot == "relation":
        return score_relations(fn, enc, [a], [b], candidates)[0]
    raise ValueError(f"未知的查询位置: {slot}")
