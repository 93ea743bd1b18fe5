"""
Schedule Service
Learning-rate and momentum schedule of a training cycle

Each cycle warms the learning rate up from zero to its peak with a cosine ramp,
holds it, then anneals it back to zero. beta1 moves the opposite way, between
``beta1_max`` and ``beta1_min``. Cycle ``c`` lasts ``epochs * 2**c`` epochs and peaks
at ``max_lr / 2**c``.
"""

import math
from typing import Optional

import torch

from core.exceptions import DomainError
from models.training import TrainConfig


def anneal_cos(start: float, end: float, pct: float) -> float:
    """Cosine interpolation from ``start`` (pct=0) to ``end`` (pct=1)."""
    return end + (start - end) / 2.0 * (math.cos(math.pi * pct) + 1)


def schedule_at(
    step: int,
    total_steps: int,
    cycle: int = 0,
    config: Optional[TrainConfig] = None,
) -> tuple[float, float]:
    """
    Learning rate and beta1 at ``step`` of a cycle.

    Args:
        step: Step within the cycle, ``0 <= step < total_steps``
        total_steps: Steps in the cycle
        cycle: Cycle index (peak learning rate halves every cycle)
        config: Schedule fractions, peak learning rate and beta1 range

    Returns:
        ``(lr, beta1)``

    Raises:
        DomainError: If ``step`` is outside the cycle
    """
    if not 0 <= step < total_steps:
        raise DomainError(f"Step {step} outside cycle of {total_steps} steps")

    config = config or TrainConfig()
    max_lr = config.cycle_max_lr(cycle)
    warmup_end = config.warmup * total_steps
    warmdown_start = (config.warmup + config.hold) * total_steps
    warmdown_steps = total_steps - warmdown_start

    if step < warmup_end:
        pct = step / warmup_end
        return (
            anneal_cos(0.0, max_lr, pct),
            anneal_cos(config.beta1_max, config.beta1_min, pct),
        )
    if step < warmdown_start or warmdown_steps <= 0:
        return max_lr, config.beta1_min

    pct = (step - warmdown_start) / warmdown_steps
    return (
        anneal_cos(max_lr, 0.0, pct),
        anneal_cos(config.beta1_min, config.beta1_max, pct),
    )


def apply_schedule(optimizer: torch.optim.Optimizer, lr: float, beta1: float) -> None:
    """Write the scheduled learning rate and beta1 into every parameter group."""
    for group in optimizer.param_groups:
        group["lr"] = lr
        _, beta2 = group["betas"]
        group["betas"] = (beta1, beta2)
