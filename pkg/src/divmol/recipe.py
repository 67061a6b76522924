"""The default prior: a generated corpus plus the training schedule that goes with it."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from pathlib import Path

from .corpus import generate_corpus
from .policy import PolicyNet, load_checkpoint, pretrain, save_checkpoint


@dataclass(frozen=True)
class PriorRecipe:
    corpus_size: int = 20000
    seed: int = 0
    epochs: int = 24
    lr: float = 4e-3
    lr_decay: float = 0.9
    batch_size: int = 128
    embed_dim: int = 32
    hidden_dim: int = 64
    layers: int = 2

    def key(self) -> str:
        text = ",".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def corpus(self) -> list[str]:
        return generate_corpus(self.corpus_size, seed=self.seed)

    def build(self, log=None) -> PolicyNet:
        return pretrain(self.corpus(), self.epochs, seed=self.seed, embed_dim=self.embed_dim,
                        hidden_dim=self.hidden_dim, layers=self.layers, lr=self.lr,
                        batch_size=self.batch_size, lr_decay=self.lr_decay, log=log)


def cached_prior(directory, recipe: PriorRecipe = PriorRecipe(), log=None) -> tuple[PolicyNet, Path]:
    """Load the recipe's checkpoint from ``directory``, training and saving it first if absent.

    The file name carries a hash of the recipe, so changing any field trains a fresh prior.
    """
    path = Path(directory) / f"prior-{recipe.key()}.ckpt"
    if path.exists():
        return load_checkpoint(path), path
    net = recipe.build(log=log)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    save_checkpoint(net, tmp)
    tmp.replace(path)
    return net, path
