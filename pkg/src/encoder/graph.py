"""
消息传递邻接结构

每条三元组 (h, r, t) 展开为两条消息边：
- 正向 h -> t，关系 r，使用 W_out，按 t 的正向入度归一化
- 反向 t -> h，逆关系 r + |R|，使用 W_in，按 h 的反向入度归一化
对齐边在这里才展开成双向，使用 W_align，按对齐入度归一化。
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..models import FusedKg, KgData

EMPTY = torch.zeros(0, dtype=torch.long)


def _inverse_degree(dst: torch.Tensor, num_nodes: int) -> torch.Tensor:
    """每条边的 1 / deg(dst)"""
    if dst.numel() == 0:
        return torch.zeros(0, dtype=torch.float64)
    deg = torch.bincount(dst, minlength=num_nodes).to(torch.float64)
    return 1.0 / deg[dst]


@dataclass(frozen=True, eq=False)
class GraphAdjacency:
    """一个图的消息边（只由训练三元组构成）"""
    num_entities: int
    num_relations: int                  # 不含逆关系
    out_src: torch.Tensor
    out_dst: torch.Tensor
    out_rel: torch.Tensor
    out_norm: torch.Tensor
    in_src: torch.Tensor
    in_dst: torch.Tensor
    in_rel: torch.Tensor
    in_norm: torch.Tensor
    align_src: torch.Tensor = EMPTY
    align_dst: torch.Tensor = EMPTY
    align_norm: torch.Tensor = torch.zeros(0, dtype=torch.float64)

    @property
    def num_align_edges(self) -> int:
        """展开后的对齐消息边数（每个对齐两条）"""
        return int(self.align_src.numel())


def build_graph(triples: np.ndarray, num_entities: int, num_relations: int,
                align_edges: Optional[np.ndarray] = None) -> GraphAdjacency:
    """由三元组数组和可选的对齐边构建邻接结构"""
    arr = torch.as_tensor(np.asarray(triples, dtype=np.int64).reshape(-1, 3))
    h, r, t = arr[:, 0], arr[:, 1], arr[:, 2]

    if align_edges is not None and len(align_edges):
        edges = torch.as_tensor(np.asarray(align_edges, dtype=np.int64).reshape(-1, 2))
        align_src = torch.cat([edges[:, 0], edges[:, 1]])
        align_dst = torch.cat([edges[:, 1], edges[:, 0]])
    else:
        align_src, align_dst = EMPTY, EMPTY

    return GraphAdjacency(
        num_entities=num_entities,
        num_relations=num_relations,
        out_src=h, out_dst=t, out_rel=r, out_norm=_inverse_degree(t, num_entities),
        in_src=t, in_dst=h, in_rel=r + num_relations, in_norm=_inverse_degree(h, num_entities),
        align_src=align_src, align_dst=align_dst, align_norm=_inverse_degree(align_dst, num_entities),
    )


def build_kg_graph(kg: KgData) -> GraphAdjacency:
    """单个 KG 的邻接结构"""
    return build_graph(kg.train, kg.num_entities, kg.num_relations)


def build_fused_graph(fused: FusedKg, message: str = "augmented") -> GraphAdjacency:
    """融合图的邻接结构

    augmented: 对齐边走 W_align 消息，不与关系嵌入组合
    plain:     对齐边当作 ALIGN 关系的普通三元组（KGC-C 消融）
    """
    if message == "augmented":
        return build_graph(fused.triples, fused.num_entities, fused.num_relations, fused.align_edges)
    if message == "plain":
        align = np.zeros((len(fused.align_edges), 3), dtype=np.int64)
        align[:, 0] = fused.align_edges[:, 0]
        align[:, 1] = fused.align_relation
        align[:, 2] = fused.align_edges[:, 1]
        triples = np.concatenate([fused.triples, align], axis=0)
        return build_graph(triples, fused.num_entities, fused.num_relations)
    raise ValueError(f"未知的融合消息模式: {message}")
