"""Random network distillation bonus for generated actives.

Both networks are policies with the agent's architecture. The target is a
fresh random initialisation that never changes; the predictor starts from
the prior and is trained to match the target's sequence log-likelihoods.
The squared gap between the two log-likelihoods measures novelty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chem import DEFAULT_VOCAB, Vocabulary
from .policy import Adam, PolicyNet, loglik_gradients, sequence_logliks


@dataclass
class RndState:
    fixed: PolicyNet
    predictor: PolicyNet
    optimizer: Adam
    vocab: Vocabulary = DEFAULT_VOCAB

    @classmethod
    def create(cls, prior: PolicyNet, seed: int, lr: float = 1e-4, vocab: Vocabulary = DEFAULT_VOCAB) -> "RndState":
        fixed = PolicyNet.random(prior.vocab_size, prior.embed_dim, prior.hidden_dim, prior.layers, seed=seed,
                                 start_id=prior.start_id, stop_id=prior.stop_id, hash_seed=prior.hash_seed)
        return cls(fixed, prior.copy(), Adam(lr=lr), vocab)

    def encode(self, molecules: Sequence) -> list[list[int]]:
        return [self.vocab.encode(m) if isinstance(m, str) else list(m) for m in molecules]


def rnd_deltas(state: RndState, molecules: Sequence) -> np.ndarray:
    """Squared log-likelihood gap between predictor and fixed network, per molecule."""
    if not len(molecules):
        return np.zeros(0)
    seqs = state.encode(molecules)
    gap = sequence_logliks(state.predictor, seqs) - sequence_logliks(state.fixed, seqs)
    return gap * gap


def rnd_delta(state: RndState, tokens) -> float:
    return float(rnd_deltas(state, [tokens])[0])


def rnd_rescale(deltas: Sequence[float]) -> np.ndarray:
    """Min-max scale over the batch; fewer than two values or a flat batch give zeros."""
    d = np.asarray(deltas, dtype=float)
    if len(d) < 2 or d.max() == d.min():
        return np.zeros_like(d)
    return (d - d.min()) / (d.max() - d.min())


def rnd_train(state: RndState, molecules: Sequence) -> float | None:
    """One Adam step on the predictor minimising the mean gap; returns the pre-step loss."""
    if not len(molecules):
        return None
    seqs = state.encode(molecules)
    target = sequence_logliks(state.fixed, seqs)
    n = len(seqs)
    ll, grads = loglik_gradients(state.predictor, seqs, lambda ll: 2.0 * (ll - target) / n)
    state.optimizer.update(state.predictor, grads)
    return float(np.mean((ll - target) ** 2))
