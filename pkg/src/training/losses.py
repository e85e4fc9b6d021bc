"""
损失函数

margin_loss: max(0, g_neg - g_pos + γ) 在所有 (正例, 负例) 对上取平均
kd_loss:     D_KL(teacher ‖ student)，老师概率视为常数
"""
import torch

from ..models import DistillationBatch

PROB_FLOOR = 1e-12


def margin_loss(goodness_pos: torch.Tensor, goodness_neg: torch.Tensor, gamma: float,
                hinge: bool = True) -> torch.Tensor:
    """goodness_neg 可以比 goodness_pos 多一维（每个正例多个负例）"""
    pos = goodness_pos
    if goodness_neg.dim() == pos.dim() + 1:
        pos = pos.unsqueeze(-1)
    diff = goodness_neg - pos + gamma
    if diff.numel() == 0:
        return diff.sum()
    if hinge:
        diff = torch.clamp(diff, min=0.0)
    return diff.mean()


def kl_divergence(teacher_probs: torch.Tensor, student_probs: torch.Tensor) -> torch.Tensor:
    """逐行 KL，零概率的老师项贡献 0"""
    p = teacher_probs.detach()
    q = torch.clamp(student_probs, min=PROB_FLOOR)
    return (torch.xlogy(p, p) - p * torch.log(q)).sum(dim=-1)


def kd_loss(batch: DistillationBatch) -> torch.Tensor:
    """一个任务上的蒸馏损失（批内平均）"""
    kl = kl_divergence(batch.teacher_probs, batch.student_probs)
    if kl.numel() == 0:
        return kl.sum()
    return kl.mean()
