"""Step-wise recurrent critic and self-critical adversarial REINFORCE.

The critic reads discrete tokens and scores every prefix. The generator's
reward at step i is how much the score moved since step i-1, so a bad
token is blamed at the step where it appears.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import PAD_ID
from .gan_wgan import CriticLoss, interpolate
from .seq2seq import length_mask

BETA2 = 1.0
GAMMA = 0.9
CLIP_VALUE = 0.01


class RecurrentCritic(nn.Module):
    """Unidirectional LSTM emitting one unbounded score per input token."""

    def __init__(self, vocab_size: int, emb_dim: int = 128, hidden_size: int = 512):
        super().__init__()
        self.config = dict(vocab_size=vocab_size, emb_dim=emb_dim, hidden_size=hidden_size)
        self.embedding = nn.Embedding(vocab_size, emb_dim, padding_idx=PAD_ID)
        self.rnn = nn.LSTM(emb_dim, hidden_size, batch_first=True)
        self.head = nn.Linear(hidden_size, 1)

    def embed(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.embedding(tokens)

    def score_embedded(self, emb: torch.Tensor) -> torch.Tensor:
        out, _ = self.rnn(emb)
        return self.head(out).squeeze(-1)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.score_embedded(self.embed(tokens))


def d2_scores(critic: RecurrentCritic, seq) -> torch.Tensor:
    """Per-prefix scores for one sequence (N,) or a batch (B, N)."""
    seq = torch.as_tensor(seq, dtype=torch.long)
    if seq.numel() == 0:
        raise ValueError("cannot score an empty sequence")
    if seq.dim() == 1:
        return critic(seq.unsqueeze(0))[0]
    return critic(seq)


def d2_aggregate(scores, lengths: torch.Tensor | None = None) -> torch.Tensor:
    """Mean score over each sequence's steps."""
    scores = torch.as_tensor(scores, dtype=torch.get_default_dtype()) if not torch.is_tensor(scores) else scores
    if scores.numel() == 0:
        raise ValueError("no scores to aggregate")
    if lengths is None:
        return scores.mean(-1)
    mask = length_mask(lengths, scores.size(-1)).to(scores)
    return (scores * mask).sum(-1) / lengths.clamp_min(1).to(scores)


def _pad_width(tokens: torch.Tensor, width: int) -> torch.Tensor:
    if tokens.size(1) >= width:
        return tokens[:, :width]
    pad = torch.full((tokens.size(0), width - tokens.size(1)), PAD_ID, dtype=tokens.dtype)
    return torch.cat([tokens, pad], dim=1)


def d2_loss(critic: RecurrentCritic, fake: torch.Tensor, fake_lengths: torch.Tensor,
            real: torch.Tensor, real_lengths: torch.Tensor, beta2: float = BETA2,
            generator: torch.Generator | None = None, eps: torch.Tensor | None = None,
            penalty: bool = True) -> CriticLoss:
    """mean D2(fake) - mean D2(real) + beta2 * gradient penalty.

    Tokens cannot be interpolated, so the penalty point is the interpolation
    of the two embedded sequences, scored over the longer of the two lengths.
    The gradient is taken with respect to the interpolated one-hot rows that
    produce that point. Otherwise the critic could grow its embedding table
    and escape the constraint.
    """
    if fake.size(0) != real.size(0):
        raise ValueError(f"batch size mismatch: {fake.size(0)} fake vs {real.size(0)} real")
    width = max(fake.size(1), real.size(1))
    fake, real = _pad_width(fake, width), _pad_width(real, width)
    fake_score = d2_aggregate(critic(fake), fake_lengths).mean()
    real_score = d2_aggregate(critic(real), real_lengths).mean()
    if not penalty:
        zero = fake_score.new_zeros(())
        return CriticLoss(fake_score - real_score, fake_score, real_score, zero)
    if eps is None:
        eps = torch.rand(fake.size(0), generator=generator)
    vocab = critic.embedding.num_embeddings
    weight = critic.embedding.weight
    rows = interpolate(F.one_hot(fake, vocab).to(weight), F.one_hot(real, vocab).to(weight),
                       eps.to(weight)).requires_grad_(True)
    agg = d2_aggregate(critic.score_embedded(rows @ weight), torch.maximum(fake_lengths, real_lengths))
    (grad,) = torch.autograd.grad(agg.sum(), rows, create_graph=True)
    gp = ((grad.flatten(1).norm(dim=1) - 1) ** 2).mean()
    return CriticLoss(fake_score - real_score + beta2 * gp, fake_score, real_score, gp)


def clip_weights(critic: nn.Module, value: float = CLIP_VALUE) -> None:
    with torch.no_grad():
        for p in critic.parameters():
            p.clamp_(-value, value)


def stepwise_rewards(scores) -> torch.Tensor:
    """r_1 = s_1 and r_i = s_i - s_{i-1}: the previous score is the baseline."""
    s = torch.as_tensor(scores, dtype=torch.float64) if not torch.is_tensor(scores) else scores
    if s.size(-1) == 0:
        raise ValueError("no scores")
    r = s.clone()
    r[..., 1:] = s[..., 1:] - s[..., :-1]
    return r


def discount(rewards, gamma: float = GAMMA, mask: torch.Tensor | None = None) -> torch.Tensor:
    """d_i = sum_{j>=i} gamma^(j-i) r_j, via d_i = r_i + gamma * d_{i+1}."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"discount must lie in [0, 1], got {gamma}")
    r = torch.as_tensor(rewards, dtype=torch.float64) if not torch.is_tensor(rewards) else rewards
    if mask is not None:
        r = r * mask.to(r)
    out = torch.empty_like(r)
    running = torch.zeros_like(r[..., 0])
    for i in range(r.size(-1) - 1, -1, -1):
        running = r[..., i] + gamma * running
        out[..., i] = running
    return out


def adversarial_surrogate(log_probs: torch.Tensor, returns: torch.Tensor) -> torch.Tensor:
    """-mean_k sum_i d_i log p(y_i | y_<i, x); returns are constants."""
    return -(returns.detach().to(log_probs) * log_probs).sum(1).mean()


reinforce_grad_adv = adversarial_surrogate


def step_returns(scores: torch.Tensor, lengths: torch.Tensor, gamma: float) -> torch.Tensor:
    """Masked step rewards followed by discounting, for a padded batch."""
    mask = length_mask(lengths, scores.size(1))
    return discount(stepwise_rewards(scores) * mask, gamma, mask)

