"""
关系嵌入相关性分析

对编码后的正向关系嵌入两两计算 Pearson 相关系数，导出为带关系名表头的 CSV。
"""
import csv
import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import torch

from ..encoder import EncodedGraph, GraphAdjacency
from ..models import MultiKgStore

logger = logging.getLogger(__name__)

ALIGN_NAME = "ALIGN"


def pearson_matrix(vectors: np.ndarray) -> np.ndarray:
    """逐行 Pearson 相关；零方差行与其他行的相关记为 0，对角线为 1"""
    x = np.asarray(vectors, dtype=np.float64)
    if x.shape[0] == 0:
        return np.zeros((0, 0))
    zero = np.ptp(x, axis=1) == 0
    if zero.any():
        logger.warning("%d 个关系嵌入方差为零，相关系数记为 0", int(zero.sum()))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.atleast_2d(np.corrcoef(x))
    corr = np.clip(np.nan_to_num(corr, nan=0.0), -1.0, 1.0)
    corr = (corr + corr.T) / 2.0
    corr[zero, :] = 0.0
    corr[:, zero] = 0.0
    np.fill_diagonal(corr, 1.0)
    return corr


def relation_correlation(params, graph: Optional[GraphAdjacency] = None) -> np.ndarray:
    """模型（或已编码结果）正向关系嵌入的相关矩阵 |R|×|R|

    给定 graph 时使用编码器输出的关系嵌入，否则使用原始关系嵌入表。
    """
    if isinstance(params, EncodedGraph):
        rel = params.relation_out[:params.num_relations]
    elif graph is not None:
        with torch.no_grad():
            rel = params.encode(graph).relation_out[:params.num_relations]
    else:
        rel = params.relation_emb[:params.num_relations]
    return pearson_matrix(rel.detach().cpu().numpy())


def relation_names_for(store: MultiKgStore, kg_name: Optional[str] = None) -> List[str]:
    """关系 id 对应的名称；kg_name 为空时返回融合模型的关系名（最后附加 ALIGN）"""
    if kg_name is not None:
        return list(store.kg_by_name(kg_name).relation_names)
    if store.shared_relation_schema:
        names = list(store.kgs[0].relation_names)
    else:
        names = [f"{kg.name}:{rel}" for kg in store.kgs for rel in kg.relation_names]
    names.append(ALIGN_NAME)
    return names


def write_correlation_csv(matrix: np.ndarray, names: Sequence[str], path) -> Path:
    path = Path(path)
    if len(names) != matrix.shape[0]:
        raise ValueError(f"关系名数量 {len(names)} 与矩阵大小 {matrix.shape[0]} 不一致")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(["relation", *names])
        for name, row in zip(names, matrix.tolist()):
            writer.writerow([name, *(f"{v:.6f}" for v in row)])
    return path
