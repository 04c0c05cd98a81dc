"""Wasserstein critic over word-distribution sequences, with gradient penalty.

The critic sees the generator's softmax rows directly, so its gradient
reaches the generator without sampling. Real sentences enter as one-hot
rows; both sides are padded to a fixed width with one-hot PAD rows.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import PAD_ID

BETA1 = 10.0
RESIDUAL_SCALE = 0.3


class CriticLoss(NamedTuple):
    total: torch.Tensor
    fake: torch.Tensor  # mean critic score on generated input
    real: torch.Tensor  # mean critic score on real input
    penalty: torch.Tensor  # mean (||grad|| - 1)^2, unweighted


class ResBlock(nn.Module):
    def __init__(self, dim: int, kernel: int = 5):
        super().__init__()
        self.conv1 = nn.Conv1d(dim, dim, kernel, padding=kernel // 2)
        self.conv2 = nn.Conv1d(dim, dim, kernel, padding=kernel // 2)

    def forward(self, x):
        return x + RESIDUAL_SCALE * self.conv2(F.relu(self.conv1(F.relu(x))))


class ConvCritic(nn.Module):
    """Residual 1-D CNN mapping (B, N, V) distribution rows to one score each."""

    def __init__(self, vocab_size: int, seq_len: int, hidden_size: int = 512,
                 n_blocks: int = 4, kernel: int = 5):
        super().__init__()
        self.config = dict(vocab_size=vocab_size, seq_len=seq_len, hidden_size=hidden_size,
                           n_blocks=n_blocks, kernel=kernel)
        self.vocab_size = vocab_size
        self.seq_len = seq_len
        self.inp = nn.Conv1d(vocab_size, hidden_size, 1)
        self.blocks = nn.Sequential(*[ResBlock(hidden_size, kernel) for _ in range(n_blocks)])
        self.head = nn.Linear(seq_len * hidden_size, 1)

    def forward(self, rows: torch.Tensor) -> torch.Tensor:
        rows = pad_to_width(rows, self.seq_len)
        h = self.blocks(self.inp(rows.transpose(1, 2)))
        return self.head(h.flatten(1)).squeeze(-1)


def pad_to_width(rows: torch.Tensor, width: int) -> torch.Tensor:
    """Truncate or extend (B, N, V) rows to ``width`` with one-hot PAD rows."""
    n = rows.size(1)
    if n >= width:
        return rows[:, :width]
    pad = torch.zeros(rows.size(0), width - n, rows.size(2), dtype=rows.dtype, device=rows.device)
    pad[..., PAD_ID] = 1.0
    return torch.cat([rows, pad], dim=1)


def one_hot_rows(tokens: torch.Tensor, vocab_size: int, dtype=torch.float32) -> torch.Tensor:
    """PAD-padded id rows -> one-hot rows (padding becomes one-hot PAD)."""
    return F.one_hot(tokens, vocab_size).to(dtype)


def d1_score(critic: Callable, dists: torch.Tensor) -> torch.Tensor:
    """Critic score of one (N, V) sequence or a (B, N, V) batch."""
    if not bool(torch.isfinite(dists).all()):
        raise ValueError("non-finite values in critic input")
    if dists.dim() == 2:
        return critic(dists.unsqueeze(0))[0]
    return critic(dists)


def interpolate(fake: torch.Tensor, real: torch.Tensor, eps) -> torch.Tensor:
    """eps * fake + (1 - eps) * real, with eps a scalar or one value per example."""
    if fake.shape != real.shape:
        raise ValueError(f"shape mismatch {tuple(fake.shape)} vs {tuple(real.shape)}")
    eps = torch.as_tensor(eps, dtype=fake.dtype, device=fake.device)
    if bool((eps < 0).any()) or bool((eps > 1).any()):
        raise ValueError("interpolation weight must lie in [0, 1]")
    if eps.dim() == 1:
        eps = eps.view(-1, *([1] * (fake.dim() - 1)))
    return eps * fake + (1 - eps) * real


def input_gradient(critic: Callable, x: torch.Tensor, create_graph: bool = True) -> torch.Tensor:
    """d critic(x_k) / d x_k for every example k."""
    x = x.detach().requires_grad_(True)
    (grad,) = torch.autograd.grad(critic(x).sum(), x, create_graph=create_graph)
    return grad


def gradient_penalty(critic: Callable, x: torch.Tensor) -> torch.Tensor:
    """Per-example (||grad_x critic(x)||_2 - 1)^2."""
    grad = input_gradient(critic, x)
    return (grad.flatten(1).norm(dim=1) - 1) ** 2


def _check_batches(fake: torch.Tensor, real: torch.Tensor) -> None:
    if fake.size(0) != real.size(0):
        raise ValueError(f"batch size mismatch: {fake.size(0)} fake vs {real.size(0)} real")


def wgan_d_loss(critic: Callable, fake: torch.Tensor, real: torch.Tensor, beta1: float = BETA1,
                generator: torch.Generator | None = None, eps: torch.Tensor | None = None) -> CriticLoss:
    """mean D(fake) - mean D(real) + beta1 * mean penalty on interpolates.

    ``fake`` and ``real`` are (K, N, V) rows of equal width; one interpolation
    weight is drawn per example unless ``eps`` is given.
    """
    _check_batches(fake, real)
    fake = fake.detach()
    if eps is None:
        eps = torch.rand(fake.size(0), generator=generator).to(fake)
    fake_score = critic(fake).mean()
    real_score = critic(real).mean()
    penalty = gradient_penalty(critic, interpolate(fake, real, eps)).mean()
    return CriticLoss(fake_score - real_score + beta1 * penalty, fake_score, real_score, penalty)


def wgan_g_objective(critic: Callable, fake: torch.Tensor) -> torch.Tensor:
    """Generator-side term: mean critic score of the generator's rows (to maximize)."""
    return critic(fake).mean()
