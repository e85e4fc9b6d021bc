"""
双向互蒸馏

对 KG_i 的一批三元组，在 head / tail / relation 三个任务上：
1. 老师在自己的 id 空间中对 KG_i 的全部候选打分，取 top-k（稳定排序，并列时 id 小者优先）
2. 老师分布 = 这 k 个候选上 goodness 的 softmax（不参与求导）
3. 学生分布 = 学生对同一组候选 goodness 的 softmax
4. 损失 = D_KL(老师 ‖ 学生)，三个任务求和
候选在两个模型之间通过 FusedKg 的双射对应：候选位置 j 对应本地 id local_ids[j]
与全局 id global_ids[j]。
"""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch

from ..encoder import EncodedGraph, ScoreFn, score_heads, score_relations, score_tails
from ..errors import InvariantViolation
from ..models import DistillationBatch, FusedKg, GateState, Task
from .losses import kd_loss

KD_TASKS = (Task.HEAD, Task.TAIL, Task.RELATION)


def topk_candidates(teacher_scores, k: int) -> torch.Tensor:
    """最大的 k 个 goodness 的下标，按 goodness 降序，并列时下标小者优先

    支持一维或 (B, C) 的批量输入。
    """
    scores = torch.as_tensor(teacher_scores)
    if k < 1 or k > scores.shape[-1]:
        raise ValueError(f"k={k} 超出候选数 {scores.shape[-1]}")
    order = torch.sort(scores, dim=-1, descending=True, stable=True).indices
    return order[..., :k]


@dataclass(frozen=True)
class CandidateSpace:
    """KG_i 某个任务的候选集合在个体模型与融合模型中的 id"""
    task: Task
    kg_id: int
    local_ids: np.ndarray           # M_i 空间
    global_ids: np.ndarray          # M_f 空间

    def __len__(self) -> int:
        return len(self.local_ids)

    def to_global(self, local: np.ndarray) -> np.ndarray:
        local = np.asarray(local, dtype=np.int64)
        if local.size and (local.min() < 0 or local.max() >= len(self.local_ids)):
            raise InvariantViolation(f"候选 id 无法映射到融合空间: {self.task.value}")
        return self.global_ids[local]

    def to_local(self, global_ids: np.ndarray) -> np.ndarray:
        global_ids = np.asarray(global_ids, dtype=np.int64)
        pos = global_ids - self.global_ids[0] if len(self.global_ids) else global_ids
        if pos.size and (pos.min() < 0 or pos.max() >= len(self.global_ids)):
            raise InvariantViolation(f"全局 id 不属于 KG {self.kg_id} 的候选: {self.task.value}")
        return self.local_ids[pos]


def candidate_space(task, kg_id: int, fused: FusedKg) -> CandidateSpace:
    """head/tail 任务的候选是 E_i，relation 任务的候选是 R_i（共享模式下即共享关系表）"""
    task = Task(task)
    if task is Task.RELATION:
        global_ids = fused.relation_ids(kg_id)
    else:
        global_ids = fused.entity_ids(kg_id)
    local_ids = np.arange(len(global_ids), dtype=np.int64)
    return CandidateSpace(task, kg_id, local_ids, global_ids)


def task_scores(fn: ScoreFn, enc: EncodedGraph, triples: np.ndarray, task: Task,
                candidates: np.ndarray) -> torch.Tensor:
    """triples 已处于 enc 的 id 空间，返回 (B, C) 的候选 goodness"""
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]
    if task is Task.TAIL:
        return score_tails(fn, enc, h, r, candidates)
    if task is Task.HEAD:
        return score_heads(fn, enc, r, t, candidates)
    return score_relations(fn, enc, h, t, candidates)


def distillation_batch(task: Task, triples: np.ndarray, teacher_scores: torch.Tensor,
                       student_scores: torch.Tensor, k: int,
                       candidate_ids: np.ndarray) -> DistillationBatch:
    """由师生在同一组候选位置上的 goodness 构造蒸馏批次"""
    k = min(int(k), teacher_scores.shape[-1])
    teacher_scores = teacher_scores.detach()
    idx = topk_candidates(teacher_scores, k)
    teacher_probs = torch.softmax(teacher_scores.gather(-1, idx), dim=-1)
    student_probs = torch.softmax(student_scores.gather(-1, idx), dim=-1)
    return DistillationBatch(
        task=task,
        triples=torch.as_tensor(triples),
        candidate_ids=torch.as_tensor(candidate_ids)[idx],
        teacher_probs=teacher_probs,
        student_probs=student_probs,
    )


def mutual_distillation(enc_i: EncodedGraph, enc_f: EncodedGraph, batch: np.ndarray, kg_id: int,
                        fused: FusedKg, score_fn, k: int, gate: GateState,
                        tasks: Sequence[Task] = KD_TASKS) -> Tuple[torch.Tensor, torch.Tensor]:
    """返回 (L^i_D, L^f_D)：M_f 教 M_i 的损失与 M_i 教 M_f 的损失

    门控关闭的方向损失为 0；老师一侧始终不参与求导。
    """
    fn = ScoreFn(score_fn)
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    global_batch = fused.localize_triples(kg_id, batch)
    loss_i = enc_i.entity_out.new_zeros(())
    loss_f = enc_f.entity_out.new_zeros(())
    if len(batch) == 0 or not (gate.teach_f_to_i or gate.teach_i_to_f):
        return loss_i, loss_f

    for task in tasks:
        space = candidate_space(task, kg_id, fused)
        if gate.teach_f_to_i:
            with torch.no_grad():
                teacher = task_scores(fn, enc_f, global_batch, task, space.global_ids)
            student = task_scores(fn, enc_i, batch, task, space.local_ids)
            loss_i = loss_i + kd_loss(distillation_batch(task, batch, teacher, student, k, space.local_ids))
        if gate.teach_i_to_f:
            with torch.no_grad():
                teacher = task_scores(fn, enc_i, batch, task, space.local_ids)
            student = task_scores(fn, enc_f, global_batch, task, space.global_ids)
            loss_f = loss_f + kd_loss(distillation_batch(task, global_batch, teacher, student, k,
                                                         space.global_ids))
    return loss_i, loss_f
