"""
优化器与梯度检查
"""
import logging
from typing import Callable, Dict, Optional

import numpy as np
import torch
from torch import nn

from ..errors import NumericError

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def make_optimizer(model: nn.Module, lr: float) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)


def grad_step(model: nn.Module, loss: torch.Tensor, optimizer: torch.optim.Optimizer, name: str = ""):
    """反向传播并做一次 Adam 更新；损失或梯度非有限时中止"""
    if not torch.isfinite(loss.detach()).all():
        raise NumericError("损失出现非有限值", {"model": name, "loss": float(loss.detach())})
    optimizer.zero_grad(set_to_none=True)
    if loss.requires_grad:
        loss.backward()
    for pname, param in model.named_parameters():
        if param.grad is not None and not torch.isfinite(param.grad).all():
            bad = int((~torch.isfinite(param.grad)).sum())
            raise NumericError("梯度出现非有限值", {"model": name, "param": pname, "count": bad})
    optimizer.step()


def gradient_check(loss_fn: Callable[[], torch.Tensor], params: Dict[str, torch.Tensor],
                   h: float = 1e-4, max_entries: Optional[int] = None, seed: int = 0,
                   floor: float = 1e-6,
                   kink_fn: Optional[Callable[[], torch.Tensor]] = None) -> Dict[str, float]:
    """解析梯度与中心差分对比，返回每个参数组的最大相对误差

    相对误差 = |a - n| / max(|a|, |n|, floor)。max_entries 限制每组检查的元素个数。
    kink_fn 返回损失中所有不可导点的自变量（L1 的逐维差值、hinge 的参数等）；
    ±h 扰动使其中任何一个变号的元素跨过了折点，中心差分无意义，跳过不计。
    """
    names = list(params)
    tensors = [params[n] for n in names]
    analytic = torch.autograd.grad(loss_fn(), tensors, allow_unused=True)
    rng = np.random.default_rng(seed)
    errors = {}

    def signs() -> Optional[torch.Tensor]:
        return None if kink_fn is None else torch.sign(kink_fn().detach())

    for name, tensor, grad in zip(names, tensors, analytic):
        flat = tensor.data.view(-1)
        grad_flat = grad.reshape(-1) if grad is not None else torch.zeros_like(flat)
        entries = np.arange(flat.numel())
        if max_entries is not None and flat.numel() > max_entries:
            entries = np.sort(rng.choice(flat.numel(), size=max_entries, replace=False))
        worst = 0.0
        skipped = 0
        with torch.no_grad():
            base = signs()
            for j in entries.tolist():
                original = flat[j].item()
                flat[j] = original + h
                plus = loss_fn().item()
                plus_signs = signs()
                flat[j] = original - h
                minus = loss_fn().item()
                minus_signs = signs()
                flat[j] = original
                if base is not None and not (torch.equal(base, plus_signs) and torch.equal(base, minus_signs)):
                    skipped += 1
                    continue
                numeric = (plus - minus) / (2 * h)
                a = grad_flat[j].item()
                worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), floor))
        errors[name] = worst
        logger.debug("梯度检查 %s: 最大相对误差 %.3e（跳过 %d 个折点元素）", name, worst, skipped)
    return errors
