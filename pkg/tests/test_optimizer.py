import pytest
import torch

from core.exceptions import NonFiniteGradientError
from services.optimizer import Ranger, centralize_gradient


def test_centralize_gradient_removes_row_means():
    grad = torch.tensor([[1.0, 3.0], [2.0, 6.0]])
    centred = centralize_gradient(grad)
    torch.testing.assert_close(centred, torch.tensor([[-1.0, 1.0], [-2.0, 2.0]]))


def test_centralize_gradient_leaves_vectors():
    grad = torch.tensor([1.0, 2.0, 3.0])
    assert centralize_gradient(grad) is grad


def test_ranger_minimises_a_quadratic():
    p = torch.tensor([3.0, -2.0], requires_grad=True)
    optimizer = Ranger([p], lr=0.3)
    initial = float((p ** 2).sum())
    for _ in range(500):
        optimizer.zero_grad()
        loss = (p ** 2).sum()
        loss.backward()
        optimizer.step()
    assert float((p ** 2).sum()) < 0.1 * initial


def test_lookahead_interpolates_towards_fast_weights():
    moved = {}
    for alpha in (0.5, 1.0):
        p = torch.tensor([1.0, 2.0], requires_grad=True)
        optimizer = Ranger([p], lr=0.1, k=1, alpha=alpha)
        (p ** 2).sum().backward()
        optimizer.step()
        moved[alpha] = p.detach() - torch.tensor([1.0, 2.0])
    torch.testing.assert_close(moved[1.0], torch.tensor([-0.2, -0.4]))
    torch.testing.assert_close(moved[0.5], moved[1.0] / 2)


def test_non_finite_gradient_leaves_parameters_untouched():
    p = torch.tensor([1.0, 2.0], requires_grad=True)
    q = torch.tensor([[1.0, 2.0]], requires_grad=True)
    optimizer = Ranger([q, p], lr=0.1)
    q.grad = torch.ones_like(q)
    p.grad = torch.tensor([float("nan"), 1.0])

    with pytest.raises(NonFiniteGradientError) as info:
        optimizer.step()
    assert info.value.details["param"] == 1
    torch.testing.assert_close(p.detach(), torch.tensor([1.0, 2.0]))
    torch.testing.assert_close(q.detach(), torch.tensor([[1.0, 2.0]]))
    assert not optimizer.state


def test_decoupled_weight_decay_shrinks_weights():
    p = torch.tensor([1.0], requires_grad=True)
    optimizer = Ranger([p], lr=0.1, weight_decay=0.5)
    p.grad = torch.zeros_like(p)
    optimizer.step()
    torch.testing.assert_close(p.detach(), torch.tensor([0.95]))


@pytest.mark.parametrize("kwargs", [{"lr": -1.0}, {"k": 0}, {"alpha": 0.0}, {"betas": (1.0, 0.9)}])
def test_invalid_hyperparameters(kwargs):
    with pytest.raises(ValueError):
        Ranger([torch.zeros(1, requires_grad=True)], **kwargs)
