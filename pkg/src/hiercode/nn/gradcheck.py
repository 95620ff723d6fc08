"""Central-difference gradient checking.

Autograd results are compared against an independent numerical oracle:
for each checked element theta, the loss is re-evaluated at theta ± h
and the slope (f+ - f-) / 2h is compared with the analytic gradient
under rel_err = |analytic - numeric| / max(1, |numeric|).
"""

from __future__ import annotations

from typing import Callable, Iterable

import torch


def finite_difference_check(
    loss_fn: Callable[[], torch.Tensor],
    tensors: Iterable[torch.Tensor],
    step: float = 1e-5,
    max_elements_per_tensor: int = 16,
    rng: torch.Generator | None = None,
) -> float:
    """Return the max relative error between autograd and central differences.

    loss_fn must recompute the scalar loss from the current tensor
    values on every call. tensors are the leaves to check; large tensors
    are subsampled to max_elements_per_tensor random elements. Use 64-bit
    tensors for meaningful tolerances.
    """
    tensors = list(tensors)
    for t in tensors:
        if not t.requires_grad:
            raise ValueError("all checked tensors must require grad")
        t.grad = None

    loss = loss_fn()
    if loss.dim() != 0:
        raise ValueError(f"loss_fn must return a scalar, got shape {tuple(loss.shape)}")
    loss.backward()
    analytic = [t.grad.detach().clone() if t.grad is not None else torch.zeros_like(t) for t in tensors]

    worst = 0.0
    for t, grad in zip(tensors, analytic):
        flat = t.detach().reshape(-1)
        n = flat.numel()
        if n <= max_elements_per_tensor:
            indices = range(n)
        else:
            perm = torch.randperm(n, generator=rng)
            indices = perm[:max_elements_per_tensor].tolist()
        grad_flat = grad.reshape(-1)
        for idx in indices:
            original = flat[idx].item()
            with torch.no_grad():
                flat[idx] = original + step
                f_plus = loss_fn().item()
                flat[idx] = original - step
                f_minus = loss_fn().item()
                flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * step)
            rel = abs(grad_flat[idx].item() - numeric) / max(1.0, abs(numeric))
            worst = max(worst, rel)
    return worst
