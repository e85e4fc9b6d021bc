"""
训练与评估过程中的记录类型

负例、蒸馏批次、门控状态、排序报告、对齐连通分量报告
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import torch

from ..errors import InvariantViolation
from .kg_data import EntityRef, Triple


class FilterMode(str, Enum):
    """过滤设置"""
    TRADITIONAL = "traditional"     # 过滤 train ∪ valid ∪ test 中的其他正例
    TRAIN_ONLY = "train_only"       # 只过滤训练集正例
    RAW = "raw"                     # 不过滤


class Task(str, Enum):
    """KGC 任务"""
    HEAD = "head"
    TAIL = "tail"
    RELATION = "relation"


class Slot(str, Enum):
    """负采样替换位置"""
    HEAD = "head"
    TAIL = "tail"


@dataclass(frozen=True)
class NegativeSample:
    """负例"""
    original: Triple
    corrupted: Triple
    corrupted_slot: Slot


@dataclass
class DistillationBatch:
    """一批三元组在某个任务上的师生分布

    candidate_ids 是学生空间中的候选 id，teacher_probs / student_probs 形状均为 (B, k)。
    """
    task: Task
    triples: torch.Tensor               # (B, 3) 学生空间本地 id
    candidate_ids: torch.Tensor         # (B, k)
    teacher_probs: torch.Tensor         # (B, k)，不参与求导
    student_probs: torch.Tensor         # (B, k)

    def validate(self, atol: float = 1e-6):
        """检查概率单纯形和候选互异"""
        if self.teacher_probs.shape != self.student_probs.shape or \
                self.teacher_probs.shape != self.candidate_ids.shape:
            raise InvariantViolation("蒸馏批次形状不一致")
        for name, probs in (("teacher", self.teacher_probs), ("student", self.student_probs)):
            p = probs.detach()
            if (p < 0).any():
                raise InvariantViolation(f"{name} 概率存在负值")
            if not torch.allclose(p.sum(dim=-1), torch.ones_like(p[..., 0]), atol=atol):
                raise InvariantViolation(f"{name} 概率之和不为 1")
        ids = self.candidate_ids
        if ids.shape[-1] > 1:
            ordered, _ = torch.sort(ids, dim=-1)
            if (ordered[..., 1:] == ordered[..., :-1]).any():
                raise InvariantViolation("候选 id 重复")


@dataclass(frozen=True)
class GateState:
    """某个 KG 上 M_i 与 M_f 的门控状态"""
    mrr_individual: float = 0.0         # M_i 在 KG_i 验证集上的 MRR
    mrr_fused_on_kg: float = 0.0        # M_f 在 KG_i 验证集上的 MRR
    teach_i_to_f: bool = True           # M_i 可以做老师
    teach_f_to_i: bool = True           # M_f 可以做老师


@dataclass
class KgMetrics:
    """单个 KG 上的排序指标"""
    mrr: float
    hits1: float
    hits10: float
    n_queries: int
    n_unseen: int = 0                   # 答案或查询实体未出现在训练集中的查询数


@dataclass
class RankingReport:
    """排序报告"""
    per_kg: Dict[str, KgMetrics]
    filter_mode: FilterMode
    task_set: Tuple[str, ...]
    split: str = "test"
    model: str = ""
    ranks: Dict[str, List[Tuple[str, int, int, int, int]]] = field(default_factory=dict)  # 可选逐查询排名

    def mean_mrr(self) -> float:
        values = [m.mrr for m in self.per_kg.values() if m.n_queries > 0]
        return sum(values) / len(values) if values else 0.0


@dataclass
class AlignmentComponentReport:
    """对齐图连通分量统计"""
    histogram: Dict[int, int]                           # 分量大小 -> 个数
    flagged: List[List[EntityRef]]                      # 超过阈值的分量
    threshold: int = 50
    same_kg_components: int = 0                         # 含同一 KG 多个实体的分量数
    component_sizes: List[int] = field(default_factory=list)

    @property
    def num_entities(self) -> int:
        return sum(size * count for size, count in self.histogram.items())

    def largest(self) -> Optional[int]:
        return max(self.histogram) if self.histogram else None
