"""
Training package
"""
from .losses import margin_loss, kl_divergence, kd_loss
from .negatives import NegativeSampler, sample_negatives
from .distillation import (
    topk_candidates, CandidateSpace, candidate_space, task_scores, distillation_batch,
    mutual_distillation, KD_TASKS,
)
from .gate import update_gate
from .optim import make_optimizer, grad_step, gradient_check
from .metrics_log import MetricsLog, fused_from
from .trainer import (
    FUSED_MODEL, TrainedModels, MultiKgTrainer, train_stage1, train_stage2, augment_for_training,
)

__all__ = [
    'margin_loss', 'kl_divergence', 'kd_loss',
    'NegativeSampler', 'sample_negatives',
    'topk_candidates', 'CandidateSpace', 'candidate_space', 'task_scores', 'distillation_batch',
    'mutual_distillation', 'KD_TASKS',
    'update_gate',
    'make_optimizer', 'grad_step', 'gradient_check',
    'MetricsLog', 'fused_from',
    'FUSED_MODEL', 'TrainedModels', 'MultiKgTrainer', 'train_stage1', 'train_stage2',
    'augment_for_training',
]
