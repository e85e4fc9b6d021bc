"""
CompGCN 编码器

单层更新：
    h'_v = f( Σ_dir 1/deg_dir(v) Σ_{(u,r)} W_dir φ(h_u, h_r)
              + 1/deg_align(v) Σ_u W_align h_u
              + W_loop φ(h_v, h_loop) )
dir ∈ {out, in}，φ 为减法（或逐元素乘法）组合，f 为 tanh。
关系嵌入每层经过一个共享线性变换 W_rel。
"""
import math
from typing import Any, Dict, Optional

import torch
from torch import nn

from ..errors import InvariantViolation, NumericError
from ..models import TrainConfig
from .graph import GraphAdjacency
from .scoring import EncodedGraph, ScoreFn

TORCH_DTYPES = {"float64": torch.float64, "float32": torch.float32}


def _uniform(shape, bound: float, generator: torch.Generator, dtype: torch.dtype) -> nn.Parameter:
    values = torch.rand(shape, generator=generator, dtype=torch.float64) * (2 * bound) - bound
    return nn.Parameter(values.to(dtype))


class CompGcnLayer(nn.Module):
    """一层带方向变换的 CompGCN"""

    def __init__(self, dim: int, with_align: bool, composition: str, activation: str,
                 dtype: torch.dtype, generator: torch.Generator):
        super().__init__()
        bound = 6.0 / math.sqrt(dim)
        self.composition = composition
        self.activation = activation
        self.w_in = _uniform((dim, dim), bound, generator, dtype)
        self.w_out = _uniform((dim, dim), bound, generator, dtype)
        self.w_loop = _uniform((dim, dim), bound, generator, dtype)
        self.w_rel = _uniform((dim, dim), bound, generator, dtype)
        self.loop_rel = _uniform((dim,), bound, generator, dtype)
        if with_align:
            self.w_align = _uniform((dim, dim), bound, generator, dtype)
        else:
            self.register_parameter("w_align", None)

    def compose(self, ent: torch.Tensor, rel: torch.Tensor) -> torch.Tensor:
        if self.composition == "mult":
            return ent * rel
        return ent - rel

    def _relational(self, ent, rel, src, rel_ids, norm, weight) -> torch.Tensor:
        msg = self.compose(ent[src], rel[rel_ids]) @ weight.T
        return msg * norm.to(msg.dtype).unsqueeze(1)

    def forward(self, ent: torch.Tensor, rel: torch.Tensor, graph: GraphAdjacency):
        agg = torch.zeros_like(ent)
        agg = agg.index_add(0, graph.out_dst, self._relational(
            ent, rel, graph.out_src, graph.out_rel, graph.out_norm, self.w_out))
        agg = agg.index_add(0, graph.in_dst, self._relational(
            ent, rel, graph.in_src, graph.in_rel, graph.in_norm, self.w_in))
        if graph.num_align_edges:
            if self.w_align is None:
                raise InvariantViolation("图中含对齐边，但模型没有 W_align")
            msg = (ent[graph.align_src] @ self.w_align.T) * graph.align_norm.to(ent.dtype).unsqueeze(1)
            agg = agg.index_add(0, graph.align_dst, msg)
        agg = agg + self.compose(ent, self.loop_rel) @ self.w_loop.T
        out = torch.tanh(agg) if self.activation == "tanh" else agg
        return out, rel @ self.w_rel.T


class KgcModel(nn.Module):
    """嵌入表 + CompGCN 编码器 + 打分函数

    with_align=True 时为融合模型 M_f，每层多一个 W_align。
    """

    def __init__(self, num_entities: int, num_relations: int, dim: int = 32, layers: int = 1,
                 with_align: bool = False, score_fn: str = "transe_l1", composition: str = "sub",
                 activation: str = "tanh", dtype: str = "float64", seed: int = 0, name: str = ""):
        super().__init__()
        self.name = name
        self.num_entities = int(num_entities)
        self.num_relations = int(num_relations)
        self.dim = int(dim)
        self.with_align = bool(with_align)
        self.score_fn = ScoreFn(score_fn)
        self.composition = composition
        self.activation = activation
        self.dtype_name = dtype
        self.seed = int(seed)

        torch_dtype = TORCH_DTYPES[dtype]
        generator = torch.Generator().manual_seed(self.seed)
        bound = 6.0 / math.sqrt(self.dim)
        self.entity_emb = _uniform((self.num_entities, self.dim), bound, generator, torch_dtype)
        self.relation_emb = _uniform((2 * self.num_relations, self.dim), bound, generator, torch_dtype)
        self.layers = nn.ModuleList(
            CompGcnLayer(self.dim, self.with_align, composition, activation, torch_dtype, generator)
            for _ in range(int(layers))
        )

    @classmethod
    def from_config(cls, config: TrainConfig, num_entities: int, num_relations: int,
                    with_align: bool = False, seed: Optional[int] = None, name: str = "") -> "KgcModel":
        return cls(
            num_entities=num_entities,
            num_relations=num_relations,
            dim=config.dim,
            layers=config.layers,
            with_align=with_align,
            score_fn=config.score_fn,
            composition=config.composition,
            activation=config.activation,
            dtype=config.dtype,
            seed=config.seed if seed is None else seed,
            name=name,
        )

    def hyperparams(self) -> Dict[str, Any]:
        """重建模型所需的超参数（写入检查点）"""
        return {
            "num_entities": self.num_entities,
            "num_relations": self.num_relations,
            "dim": self.dim,
            "layers": len(self.layers),
            "with_align": self.with_align,
            "score_fn": self.score_fn.value,
            "composition": self.composition,
            "activation": self.activation,
            "dtype": self.dtype_name,
            "seed": self.seed,
            "name": self.name,
        }

    def encode(self, graph: GraphAdjacency) -> EncodedGraph:
        if graph.num_entities != self.num_entities or graph.num_relations != self.num_relations:
            raise InvariantViolation(
                f"图规模 ({graph.num_entities}, {graph.num_relations}) 与模型 "
                f"({self.num_entities}, {self.num_relations}) 不一致")
        ent, rel = self.entity_emb, self.relation_emb
        for i, layer in enumerate(self.layers):
            ent, rel = layer(ent, rel, graph)
            if not torch.isfinite(ent).all() or not torch.isfinite(rel).all():
                raise NumericError("编码器输出出现非有限值", {"model": self.name, "layer": i})
        return EncodedGraph(ent, rel)

    def forward(self, graph: GraphAdjacency) -> EncodedGraph:
        return self.encode(graph)


def encode(params: KgcModel, graph: GraphAdjacency) -> EncodedGraph:
    """单个 KG 的编码（图中不允许有对齐边）"""
    if graph.num_align_edges:
        raise InvariantViolation("encode 不处理对齐边，请使用 encode_fused")
    return params.encode(graph)


def encode_fused(params: KgcModel, graph: GraphAdjacency) -> EncodedGraph:
    """融合图编码，对齐边消息使用 W_align 且不与关系嵌入组合"""
    if not params.with_align:
        raise InvariantViolation("encode_fused 需要带 W_align 的融合模型")
    return params.encode(graph)
