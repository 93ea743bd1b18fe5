"""
Optimizer Service
Rectified Adam with gradient centralisation, decoupled weight decay and Lookahead
"""

import logging
import math
from typing import Iterable

import torch

from constants.messages import ErrorMessages
from core.exceptions import NonFiniteGradientError

logger = logging.getLogger(__name__)

# Below this length of the approximated SMA the variance is too uncertain to adapt
RECTIFY_THRESHOLD = 5.0


def centralize_gradient(grad: torch.Tensor) -> torch.Tensor:
    """Subtract the mean over every axis but the first; vectors and scalars are returned as-is."""
    if grad.dim() <= 1:
        return grad
    return grad - grad.mean(dim=tuple(range(1, grad.dim())), keepdim=True)


class Ranger(torch.optim.Optimizer):
    """
    RAdam inner optimizer wrapped in Lookahead.

    Each step centralises multi-axis gradients, applies decoupled weight decay,
    then a rectified Adam update. Every ``k`` steps the slow weights move a
    fraction ``alpha`` towards the fast weights and the fast weights are reset to
    them.

    A step with a non-finite gradient raises :class:`NonFiniteGradientError`
    before any parameter or state is modified.
    """

    def __init__(
        self,
        params: Iterable,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.95, 0.999),
        eps: float = 1e-5,
        weight_decay: float = 0.0,
        k: int = 6,
        alpha: float = 0.5,
        centralize: bool = True,
    ):
        if lr < 0:
            raise ValueError(f"Invalid learning rate: {lr}")
        if not 0.0 <= betas[0] < 1.0 or not 0.0 <= betas[1] < 1.0:
            raise ValueError(f"Invalid betas: {betas}")
        if k < 1 or not 0.0 < alpha <= 1.0:
            raise ValueError(f"Invalid lookahead parameters: k={k}, alpha={alpha}")
        defaults = dict(
            lr=lr,
            betas=betas,
            eps=eps,
            weight_decay=weight_decay,
            k=k,
            alpha=alpha,
            centralize=centralize,
        )
        super().__init__(params, defaults)

    def _check_gradients(self) -> None:
        for group_index, group in enumerate(self.param_groups):
            for param_index, p in enumerate(group["params"]):
                if p.grad is not None and not torch.isfinite(p.grad).all():
                    raise NonFiniteGradientError(
                        ErrorMessages.NON_FINITE_GRADIENT.format(name=f"{group_index}.{param_index}"),
                        details={"group": group_index, "param": param_index, "shape": list(p.shape)},
                    )

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()

        self._check_gradients()

        for group in self.param_groups:
            beta1, beta2 = group["betas"]
            rho_inf = 2.0 / (1.0 - beta2) - 1.0

            for p in group["params"]:
                if p.grad is None:
                    continue
                grad = p.grad
                if grad.is_sparse:
                    raise RuntimeError("Ranger does not support sparse gradients")
                if group["centralize"]:
                    grad = centralize_gradient(grad)

                state = self.state[p]
                if not state:
                    state["step"] = 0
                    state["exp_avg"] = torch.zeros_like(p)
                    state["exp_avg_sq"] = torch.zeros_like(p)
                    state["slow"] = p.detach().clone()

                state["step"] += 1
                t = state["step"]
                exp_avg, exp_avg_sq = state["exp_avg"], state["exp_avg_sq"]
                exp_avg.mul_(beta1).add_(grad, alpha=1 - beta1)
                exp_avg_sq.mul_(beta2).addcmul_(grad, grad, value=1 - beta2)

                if group["weight_decay"]:
                    p.mul_(1 - group["lr"] * group["weight_decay"])

                bias1 = 1 - beta1 ** t
                bias2 = 1 - beta2 ** t
                rho_t = rho_inf - 2 * t * beta2 ** t / bias2
                if rho_t > RECTIFY_THRESHOLD:
                    rect = math.sqrt(
                        (rho_t - 4) * (rho_t - 2) * rho_inf / ((rho_inf - 4) * (rho_inf - 2) * rho_t)
                    )
                    denom = (exp_avg_sq / bias2).sqrt_().add_(group["eps"])
                    p.addcdiv_(exp_avg, denom, value=-group["lr"] * rect / bias1)
                else:
                    p.add_(exp_avg, alpha=-group["lr"] / bias1)

                if t % group["k"] == 0:
                    slow = state["slow"]
                    slow.add_(p - slow, alpha=group["alpha"])
                    p.copy_(slow)

        return loss
