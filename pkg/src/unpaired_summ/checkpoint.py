"""Versioned checkpoint container: model weights plus the vocabulary they index."""

from __future__ import annotations

from pathlib import Path

import torch
import torch.nn as nn

from .corpus import Vocabulary
from .gan_reinforce import RecurrentCritic
from .gan_wgan import ConvCritic
from .seq2seq import PointerGenerator

FORMAT = "unpaired-summ-checkpoint"
VERSION = 1
_CLASSES = {cls.__name__: cls for cls in (PointerGenerator, ConvCritic, RecurrentCritic)}


class VocabularyMismatch(ValueError):
    pass


def save_checkpoint(path: str | Path, vocab: Vocabulary, models: dict[str, nn.Module],
                    **extra) -> None:
    blob = {
        "format": FORMAT,
        "version": VERSION,
        "vocab_hash": vocab.hash,
        "vocab": vocab.tokens,
        "models": {name: {"class": type(m).__name__, "config": m.config, "state": m.state_dict()}
                   for name, m in models.items()},
        **extra,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(blob, path)


def load_checkpoint(path: str | Path, vocab: Vocabulary | None = None) -> dict:
    """Load a checkpoint, rebuilding its models.

    Raises VocabularyMismatch when ``vocab`` does not hash to the stored
    vocabulary. The result holds ``vocab``, ``models`` and any extras.
    """
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("format") != FORMAT:
        raise ValueError(f"{path} is not a checkpoint of this package")
    if blob["version"] > VERSION:
        raise ValueError(f"checkpoint version {blob['version']} is newer than {VERSION}")
    stored = Vocabulary(blob["vocab"][4:])
    if stored.hash != blob["vocab_hash"]:
        raise ValueError("corrupt checkpoint: vocabulary hash does not match its tokens")
    if vocab is not None and vocab.hash != blob["vocab_hash"]:
        raise VocabularyMismatch("checkpoint was built with a different vocabulary")
    models = {}
    for name, spec in blob["models"].items():
        model = _CLASSES[spec["class"]](**spec["config"])
        model.load_state_dict(spec["state"])
        models[name] = model
    blob["models"] = models
    blob["vocab"] = stored
    return blob
