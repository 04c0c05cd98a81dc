"""Mode dispatch between the two critics: ``wgan`` and ``reinforce``."""

from __future__ import annotations

import torch
import torch.nn as nn

from . import gan_reinforce as gr
from . import gan_wgan as gw
from .seq2seq import GeneratorOutput

MODES = ("wgan", "reinforce")
_ALIASES = {"adv-reinforce": "reinforce", "wgan-gp": "wgan"}


def canonical_mode(mode: str) -> str:
    mode = _ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValueError(f"unknown adversarial mode {mode!r}; expected one of {MODES}")
    return mode


def make_critic(mode: str, vocab_size: int, width: int, hidden_size: int = 512,
                n_blocks: int = 4, emb_dim: int = 128) -> nn.Module:
    if canonical_mode(mode) == "wgan":
        return gw.ConvCritic(vocab_size, width, hidden_size, n_blocks)
    return gr.RecurrentCritic(vocab_size, emb_dim, hidden_size)


def critic_loss(mode: str, critic: nn.Module, out: GeneratorOutput, real: torch.Tensor,
                real_lengths: torch.Tensor, *, beta: float, generator: torch.Generator | None,
                penalty: bool = True) -> gw.CriticLoss:
    """Critic loss on one batch of generator output against real token rows."""
    if canonical_mode(mode) == "wgan":
        width = critic.seq_len
        fake = gw.pad_to_width(out.dists.detach(), width)
        real_rows = gw.pad_to_width(gw.one_hot_rows(real, critic.vocab_size, fake.dtype), width)
        return gw.wgan_d_loss(critic, fake, real_rows, beta, generator=generator)
    return gr.d2_loss(critic, out.sampled, out.lengths, real, real_lengths, beta,
                      generator=generator, penalty=penalty)
