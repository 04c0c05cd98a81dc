"""Joint adversarial training of generator, reconstructor and critic.

Each generator update minimizes

    alpha * (reconstruction REINFORCE surrogate) + adversarial term

where the adversarial term is ``-mean D1(G(x))`` in ``wgan`` mode and the
discounted step-reward surrogate in ``reinforce`` mode. The reconstructor
takes a step on the same samples, and the critic takes ``d_steps_per_g``
steps before every generator step.

Alpha trades the two signals: too large and the summaries stop looking
like real sentences, too small and they drift away from the input.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import typing
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn

from . import gan_reinforce as gr
from . import gan_wgan as gw
from . import pretraining
from .adversarial import canonical_mode, critic_loss, make_critic
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import BatchSampler, PairedBatch, Vocabulary, make_paired_batch
from .reconstruction import BaselineSchedule, per_token_nll, reconstruct_loss, reconstruction_reward, reinforce_surrogate
from .seq2seq import PointerGenerator

logger = logging.getLogger(__name__)

ALPHA = 25.0
ALPHA_TRANSFER = 50.0
METRIC_FIELDS = ("t", "r_loss", "d_loss", "adv", "reward_mean", "b", "tf")


def teacher_force_period(n_labeled: int) -> int:
    """Unpaired updates between teacher-forcing steps, by labeled-set size."""
    if n_labeled < 1:
        raise ValueError("no labeled data")
    if n_labeled < 500_000:
        return 25
    if n_labeled < 1_000_000:
        return 5
    return 3


@dataclass
class TrainConfig:
    mode: str = "wgan"
    alpha: float | None = None  # None: 25, or 50 in transfer mode
    transfer: bool = False
    beta1: float = gw.BETA1
    beta2: float = gr.BETA2
    gamma: float = gr.GAMMA
    g_lr: float = 1e-5
    d_lr: float = 1e-3
    r_lr: float = 1e-3
    rms_decay: float = 0.9
    baseline_start: float = 0.25
    baseline_horizon: int = 10000
    tf_period: int | None = None
    d_steps_per_g: int = 1
    max_updates: int = 10000
    batch_size: int = 32
    max_src_len: int = 250
    max_sum_len: int = 20
    emb_dim: int = 128
    hidden_size: int = 600
    d_hidden: int = 512
    d_blocks: int = 4
    d_emb: int = 128
    clip_mode: str = "penalty"
    clip_value: float = gr.CLIP_VALUE
    grad_clip: float = 5.0
    checkpoint_every: int = 1000
    seed: int = 0

    def __post_init__(self):
        self.mode = canonical_mode(self.mode)
        if self.alpha is None:
            self.alpha = ALPHA_TRANSFER if self.transfer else ALPHA
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        for name in ("g_lr", "d_lr", "r_lr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.tf_period is not None and self.tf_period < 1:
            raise ValueError("tf_period must be >= 1")
        if self.d_steps_per_g < 1:
            raise ValueError("d_steps_per_g must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.clip_mode not in ("penalty", "weight-clip"):
            raise ValueError(f"unknown clip_mode {self.clip_mode!r}")
        if self.clip_mode == "weight-clip" and self.mode == "wgan":
            raise ValueError("weight clipping is only available for the recurrent critic")

    @property
    def decode_len(self) -> int:
        # Room for the summary plus its EOS.
        return self.max_sum_len + 1

    @property
    def beta(self) -> float:
        return self.beta1 if self.mode == "wgan" else self.beta2

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        hints = typing.get_type_hints(cls)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: _coerce(v, hints[k]) for k, v in values.items()})

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "TrainConfig":
        values = {}
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(values)

    def to_text(self) -> str:
        return "".join(f"{k}={'none' if v is None else v}\n" for k, v in dataclasses.asdict(self).items())


def _coerce(value, hint):
    if not isinstance(value, str):
        return value
    args = typing.get_args(hint)
    if type(None) in args:
        if value.lower() in ("none", "null", ""):
            return None
        hint = next(a for a in args if a is not type(None))
    if hint is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return hint(value)


def _rmsprop(params, lr: float, decay: float) -> torch.optim.Optimizer:
    return torch.optim.RMSprop(params, lr=lr, alpha=decay, eps=1e-8)


@dataclass
class PretrainConfig:
    g_epochs: int = 20
    critic_steps: int = 200
    lr: float = 1e-3
    pair_copies: int = 2


def build_models(config: TrainConfig, vocab_size: int, seed: int | None = None) -> dict[str, nn.Module]:
    torch.manual_seed(config.seed if seed is None else seed)
    return {
        "generator": PointerGenerator(vocab_size, config.emb_dim, config.hidden_size),
        "reconstructor": PointerGenerator(vocab_size, config.emb_dim, config.hidden_size),
        "critic": make_critic(config.mode, vocab_size, config.decode_len, config.d_hidden,
                              config.d_blocks, config.d_emb),
    }


def pretrain_models(config: TrainConfig, vocab_size: int, docs: Sequence, pool: Sequence,
                    pre: PretrainConfig, pairs: Sequence | None = None) -> tuple[dict, dict]:
    """Pre-train G on shuffle pairs (or given pairs), then R and D on G's output."""
    models = build_models(config, vocab_size)
    if pairs is None:
        pairs = pretraining.shuffle_pairs(docs, seed=config.seed, copies=pre.pair_copies)
    g_hist = pretraining.pretrain_generator(models["generator"], pairs, pre.g_epochs, pre.lr,
                                            config.batch_size, config.seed)
    r_hist, d_hist = pretraining.pretrain_critics(
        models["generator"], models["reconstructor"], models["critic"], config.mode, docs, pool,
        pre.critic_steps, config.decode_len, config.beta, config.batch_size, pre.lr, config.seed)
    return models, {"generator": g_hist, "reconstructor": r_hist, "critic": d_hist}


class Trainer:
    """Alternating critic / generator updates with optional teacher forcing."""

    def __init__(self, config: TrainConfig, vocab: Vocabulary, docs: Sequence, pool: Sequence,
                 models: dict[str, nn.Module], paired: Sequence[tuple] | None = None):
        self.config = config
        self.vocab = vocab
        self.generator: PointerGenerator = models["generator"]
        self.reconstructor: PointerGenerator = models["reconstructor"]
        self.critic: nn.Module = models["critic"]
        self._check_critic()
        self.sampler = BatchSampler(docs, pool, config.batch_size, config.seed)
        self.paired = [(tuple(getattr(d, "tokens", d)), tuple(s)) for d, s in (paired or [])]
        self.paired_rng = np.random.default_rng(config.seed + 1)
        self.rng = torch.Generator().manual_seed(config.seed)
        self.baseline = BaselineSchedule(config.baseline_start, config.baseline_horizon)
        self.g_opt = _rmsprop(self.generator.parameters(), config.g_lr, config.rms_decay)
        self.r_opt = _rmsprop(self.reconstructor.parameters(), config.r_lr, config.rms_decay)
        self.d_opt = _rmsprop(self.critic.parameters(), config.d_lr, config.rms_decay)
        self.t = 0
        self.tf_count = 0
        self.metrics: list[dict] = []
        self._last_d_loss = float("nan")

    def _check_critic(self) -> None:
        want = gw.ConvCritic if self.config.mode == "wgan" else gr.RecurrentCritic
        if not isinstance(self.critic, want):
            raise TypeError(f"{self.config.mode} mode needs a {want.__name__}")

    @property
    def models(self) -> dict[str, nn.Module]:
        return {"generator": self.generator, "reconstructor": self.reconstructor, "critic": self.critic}

    def _guard(self, **values) -> None:
        for name, v in values.items():
            if not math.isfinite(v.item() if torch.is_tensor(v) else float(v)):
                raise FloatingPointError(f"non-finite {name} at update {self.t}")

    def _clip(self, module: nn.Module) -> None:
        if self.config.grad_clip:
            torch.nn.utils.clip_grad_norm_(module.parameters(), self.config.grad_clip)

    def d_update(self, batch=None) -> float:
        """One critic step on fresh generator samples against real summaries."""
        cfg = self.config
        batch = batch or self.sampler.next_batch()
        with torch.no_grad():
            out = self.generator.sample(batch.documents, batch.doc_lengths, cfg.decode_len,
                                        self.rng, with_greedy=False)
        penalty = cfg.clip_mode == "penalty"
        loss = critic_loss(cfg.mode, self.critic, out, batch.summaries, batch.summary_lengths,
                           beta=cfg.beta, generator=self.rng, penalty=penalty)
        self._guard(d_loss=loss.total)
        self.d_opt.zero_grad()
        loss.total.backward()
        self.d_opt.step()
        if not penalty:
            gr.clip_weights(self.critic, cfg.clip_value)
        self._last_d_loss = loss.total.item()
        return self._last_d_loss

    def generator_objective(self, out, reward: torch.Tensor):
        """(total, reconstruction surrogate, adversarial term, critic score of the samples)."""
        cfg = self.config
        recon = reinforce_surrogate(out.log_probs, reward)
        if cfg.mode == "wgan":
            self.critic.requires_grad_(False)
            try:
                score = gw.wgan_g_objective(self.critic, gw.pad_to_width(out.dists, cfg.decode_len))
            finally:
                self.critic.requires_grad_(True)
            adv = -score
        else:
            with torch.no_grad():
                scores = self.critic(out.sampled)
                score = gr.d2_aggregate(scores, out.lengths).mean()
                returns = gr.step_returns(scores, out.lengths, cfg.gamma)
            adv = gr.adversarial_surrogate(out.log_probs, returns)
        return cfg.alpha * recon + adv, recon, adv, score

    def g_update(self, batch=None) -> dict:
        """One generator step and one reconstructor step on the same samples."""
        cfg = self.config
        batch = batch or self.sampler.next_batch()
        docs, dl = batch.documents, batch.doc_lengths
        out = self.generator.sample(docs, dl, cfg.decode_len, self.rng)
        l_s = reconstruct_loss(self.reconstructor, out.sampled, out.lengths, docs, dl)
        with torch.no_grad():
            l_a = reconstruct_loss(self.reconstructor, out.greedy, out.greedy_lengths, docs, dl)
        b = self.baseline(self.t)
        reward = reconstruction_reward(l_s.detach(), l_a, b)
        g_loss, _, _, score = self.generator_objective(out, reward)
        r_loss = l_s.mean()
        self._guard(g_loss=g_loss, r_loss=r_loss)

        self.g_opt.zero_grad()
        g_loss.backward()
        self._clip(self.generator)
        self.g_opt.step()

        self.r_opt.zero_grad()
        r_loss.backward()
        self._clip(self.reconstructor)
        self.r_opt.step()
        return {"r_loss": r_loss.item(), "adv": score.item(), "reward_mean": reward.mean().item(), "b": b}

    def next_paired_batch(self) -> PairedBatch:
        k = min(self.config.batch_size, len(self.paired))
        idx = self.paired_rng.choice(len(self.paired), size=k, replace=False)
        return make_paired_batch([self.paired[i][0] for i in idx], [self.paired[i][1] for i in idx])

    def teacher_force_step(self, batch: PairedBatch | None = None) -> float | None:
        """Supervised cross-entropy step on G; no-op without labeled pairs."""
        if batch is None:
            if not self.paired:
                return None
            batch = self.next_paired_batch()
        lp = self.generator.target_log_probs(batch.documents, batch.doc_lengths,
                                             batch.targets, batch.target_lengths)
        loss = per_token_nll(lp, batch.target_lengths).mean()
        self._guard(tf_loss=loss)
        self.g_opt.zero_grad()
        loss.backward()
        self._clip(self.generator)
        self.g_opt.step()
        self.tf_count += 1
        return loss.item()

    def tf_due(self) -> bool:
        p = self.config.tf_period
        return p is not None and self.t > 0 and self.t % p == 0

    def step(self) -> dict:
        for _ in range(self.config.d_steps_per_g):
            self.d_update()
        record = self.g_update()
        self.t += 1
        fired = self.tf_due() and bool(self.paired)
        if fired:
            self.teacher_force_step()
        record = {"t": self.t, "d_loss": self._last_d_loss, "tf": int(fired), **record}
        self.metrics.append({k: record[k] for k in METRIC_FIELDS})
        return record

    def run(self, max_updates: int | None = None, out_dir: str | Path | None = None,
            log_every: int = 0) -> list[dict]:
        """Train until ``max_updates`` generator updates have been made in total."""
        total = self.config.max_updates if max_updates is None else max_updates
        out_dir = Path(out_dir) if out_dir else None
        log = None
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
            log = open(out_dir / "metrics.tsv", "a", encoding="utf-8")
            if log.tell() == 0:
                log.write("\t".join(METRIC_FIELDS) + "\n")
        try:
            while self.t < total:
                rec = self.step()
                if log:
                    log.write(format_record(rec) + "\n")
                    log.flush()
                if log_every and self.t % log_every == 0:
                    logger.info("update %d  r_loss %.4f  d_loss %.4f  adv %.4f  reward %.4f",
                                self.t, rec["r_loss"], rec["d_loss"], rec["adv"], rec["reward_mean"])
                if out_dir and self.config.checkpoint_every and self.t % self.config.checkpoint_every == 0:
                    self.save(out_dir / f"checkpoint_{self.t}.pt")
        finally:
            if log:
                log.close()
        if out_dir:
            self.save(out_dir / "checkpoint_final.pt")
        return self.metrics

    def state_dict(self) -> dict:
        return {
            "config": dataclasses.asdict(self.config),
            "t": self.t,
            "tf_count": self.tf_count,
            "metrics": [dict(m) for m in self.metrics],
            "last_d_loss": self._last_d_loss,
            "rng": self.rng.get_state(),
            "paired_rng": self.paired_rng.bit_generator.state,
            "sampler": self.sampler.state_dict(),
            "optimizers": {"g": self.g_opt.state_dict(), "r": self.r_opt.state_dict(),
                           "d": self.d_opt.state_dict()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = state["t"]
        self.tf_count = state["tf_count"]
        self.metrics = [dict(m) for m in state["metrics"]]
        self._last_d_loss = state["last_d_loss"]
        self.rng.set_state(state["rng"])
        self.paired_rng.bit_generator.state = state["paired_rng"]
        self.sampler.load_state_dict(state["sampler"])
        self.g_opt.load_state_dict(state["optimizers"]["g"])
        self.r_opt.load_state_dict(state["optimizers"]["r"])
        self.d_opt.load_state_dict(state["optimizers"]["d"])

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, self.vocab, self.models, trainer=self.state_dict())

    @classmethod
    def resume(cls, path: str | Path, docs: Sequence, pool: Sequence, vocab: Vocabulary | None = None,
               paired: Sequence | None = None) -> "Trainer":
        blob = load_checkpoint(path, vocab)
        state = blob["trainer"]
        trainer = cls(TrainConfig(**state["config"]), blob["vocab"], docs, pool, blob["models"], paired)
        trainer.load_state_dict(state)
        return trainer


def format_record(rec: dict) -> str:
    return "\t".join(repr(rec[k]) if isinstance(rec[k], float) else str(rec[k]) for k in METRIC_FIELDS)


def run(config: TrainConfig, vocab: Vocabulary, docs: Sequence, pool: Sequence,
        models: dict[str, nn.Module] | None = None, pretrain: PretrainConfig | None = None,
        paired: Sequence | None = None, out_dir: str | Path | None = None) -> Trainer:
    """Pre-train if asked, then train jointly for ``config.max_updates`` updates."""
    if models is None:
        if pretrain is None:
            raise ValueError("no pre-trained models supplied and pre-training is disabled")
        models, _ = pretrain_models(config, len(vocab), docs, pool, pretrain)
    missing = {"generator", "reconstructor", "critic"} - set(models)
    if missing:
        raise ValueError(f"missing pre-trained models: {sorted(missing)}")
    trainer = Trainer(config, vocab, docs, pool, models, paired)
    trainer.run(config.max_updates, out_dir)
    return trainer
