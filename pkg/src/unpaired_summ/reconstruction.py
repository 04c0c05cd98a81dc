"""Reconstructor losses and the self-critical reconstruction reward for the generator."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .seq2seq import PointerGenerator, length_mask

BASELINE_START = 0.25
BASELINE_HORIZON = 10000


@dataclass(frozen=True)
class BaselineSchedule:
    """Exploration bonus added to the reward; decays linearly to zero."""

    b0: float = BASELINE_START
    horizon: int = BASELINE_HORIZON

    def __call__(self, t: int) -> float:
        if t < 0:
            raise ValueError("update index must be >= 0")
        if self.horizon <= 0:
            return 0.0
        return max(0.0, self.b0 * (1.0 - t / self.horizon))


def baseline_value(schedule: BaselineSchedule, t: int) -> float:
    return schedule(t)


def per_token_nll(log_probs: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood per row from masked per-token log-probs."""
    mask = length_mask(lengths, log_probs.size(1))
    return -(log_probs * mask).sum(1) / lengths.clamp_min(1).to(log_probs)


def reconstruct_loss(reconstructor: PointerGenerator, summary: torch.Tensor,
                     summary_lengths: torch.Tensor, source: torch.Tensor,
                     source_lengths: torch.Tensor) -> torch.Tensor:
    """Per-document cross-entropy of the source given a discrete summary.

    The reconstructor reads ``summary`` and is teacher-forced on ``source``.
    Returns a (K,) tensor averaged over each document's tokens.
    """
    if summary.dim() == 1:
        summary, source = summary.unsqueeze(0), source.unsqueeze(0)
        summary_lengths = torch.as_tensor([summary_lengths]).view(1)
        source_lengths = torch.as_tensor([source_lengths]).view(1)
    if summary.size(1) == 0 or bool((summary_lengths < 1).any()):
        raise ValueError("cannot reconstruct from an empty summary")
    lp = reconstructor.target_log_probs(summary, summary_lengths, source, source_lengths)
    return per_token_nll(lp, source_lengths)


def reconstruction_reward(l_s, l_a, b):
    """Self-critical reward: -l_s minus the baseline (-l_a - b)."""
    return -l_s - (-l_a - b)


def reinforce_surrogate(log_probs: torch.Tensor, reward: torch.Tensor) -> torch.Tensor:
    """-mean_k reward_k * sum_i log p(y_i); the reward carries no gradient.

    ``log_probs`` is (K, N), already zero past each sequence's end.
    """
    reward = torch.as_tensor(reward, dtype=log_probs.dtype, device=log_probs.device).detach()
    return -(reward * log_probs.sum(1)).mean()


reinforce_grad_recon = reinforce_surrogate
