"""Autoregressive LSTM policy over tokens, written directly in numpy.

Every sequence is a list of token ids that begins with START. A finished
sequence ends with STOP; a truncated one does not. The sequence
log-likelihood scores the body tokens only (everything after START and
before a terminal STOP). Pretraining additionally scores the STOP
prediction so the prior learns where molecules end.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .chem import DEFAULT_HASH_SEED, DEFAULT_VOCAB

CHECKPOINT_MAGIC = b"DIVMOL-POLICY"
CHECKPOINT_VERSION = 1


class NonFiniteGradient(FloatingPointError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class CheckpointError(ValueError):
    pass


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class PolicyNet:
    """Embedding -> stacked LSTM -> linear -> softmax.

    Parameters live in ``self.params`` under fixed names; ``param_names``
    gives the canonical ordering used by checkpoints and the optimizer.
    """

    def __init__(
        self,
        vocab_size: int,
        embed_dim: int = 32,
        hidden_dim: int = 64,
        layers: int = 2,
        params: dict[str, np.ndarray] | None = None,
        start_id: int = DEFAULT_VOCAB.start,
        stop_id: int = DEFAULT_VOCAB.stop,
        hash_seed: int = DEFAULT_HASH_SEED,
    ):
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.layers = layers
        self.start_id = start_id
        self.stop_id = stop_id
        self.hash_seed = hash_seed
        if params is None:
            params = {name: np.zeros(shape) for name, shape in self.shapes().items()}
        self.params = params

    def shapes(self) -> dict[str, tuple[int, ...]]:
        H, E, V = self.hidden_dim, self.embed_dim, self.vocab_size
        shapes: dict[str, tuple[int, ...]] = {"embedding": (V, E)}
        for layer in range(self.layers):
            shapes[f"w_in{layer}"] = (E if layer == 0 else H, 4 * H)
            shapes[f"w_rec{layer}"] = (H, 4 * H)
            shapes[f"b{layer}"] = (4 * H,)
        shapes["w_out"] = (H, V)
        shapes["b_out"] = (V,)
        return shapes

    @property
    def param_names(self) -> list[str]:
        return list(self.shapes())

    @classmethod
    def random(cls, vocab_size: int, embed_dim: int = 32, hidden_dim: int = 64, layers: int = 2,
               seed: int = 0, **kwargs) -> "PolicyNet":
        net = cls(vocab_size, embed_dim, hidden_dim, layers, **kwargs)
        rng = np.random.default_rng(seed)
        scale = 1.0 / math.sqrt(hidden_dim)
        for name, shape in net.shapes().items():
            if name == "embedding":
                net.params[name] = rng.normal(0.0, 1.0, shape)
            else:
                net.params[name] = rng.uniform(-scale, scale, shape)
        return net

    def copy(self) -> "PolicyNet":
        return PolicyNet(
            self.vocab_size, self.embed_dim, self.hidden_dim, self.layers,
            {k: v.copy() for k, v in self.params.items()},
            self.start_id, self.stop_id, self.hash_seed,
        )

    def load_state(self, other: "PolicyNet") -> None:
        for k, v in other.params.items():
            self.params[k][...] = v

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in self.param_names:
            h.update(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())
        return h.hexdigest()

    # ---- recurrent core -------------------------------------------------

    def initial_state(self, batch: int) -> list[tuple[np.ndarray, np.ndarray]]:
        H = self.hidden_dim
        return [(np.zeros((batch, H)), np.zeros((batch, H))) for _ in range(self.layers)]

    def step(self, ids: np.ndarray, state):
        """One time step for a batch of token ids; returns (logits, new state)."""
        H = self.hidden_dim
        x = self.params["embedding"][ids]
        new_state = []
        for layer, (h, c) in enumerate(state):
            z = x @ self.params[f"w_in{layer}"] + h @ self.params[f"w_rec{layer}"] + self.params[f"b{layer}"]
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            o = _sigmoid(z[:, 2 * H:3 * H])
            g = np.tanh(z[:, 3 * H:])
            c = f * c + i * g
            h = o * np.tanh(c)
            new_state.append((h, c))
            x = h
        return x @ self.params["w_out"] + self.params["b_out"], new_state


# ---- batched forward / backward -------------------------------------------

def _pad(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    T = max(len(s) for s in seqs)
    ids = np.zeros((len(seqs), T), dtype=np.int64)
    for b, s in enumerate(seqs):
        ids[b, :len(s)] = s
    lengths = np.array([len(s) for s in seqs])
    return ids, lengths


def score_mask(net: PolicyNet, seqs: Sequence[Sequence[int]], include_stop: bool = False) -> np.ndarray:
    """Mask over prediction positions (target index - 1) that count toward the likelihood."""
    T = max(len(s) for s in seqs)
    mask = np.zeros((len(seqs), max(T - 1, 1)))
    for b, s in enumerate(seqs):
        end = len(s) - 1
        if not include_stop and len(s) > 1 and s[-1] == net.stop_id:
            end -= 1
        mask[b, :end] = 1.0
    return mask


def _forward(net: PolicyNet, inputs: np.ndarray, keep_cache: bool):
    B, T = inputs.shape
    H = net.hidden_dim
    layer_in = net.params["embedding"][inputs]
    caches = []
    for layer in range(net.layers):
        w_rec = net.params[f"w_rec{layer}"]
        zx = layer_in @ net.params[f"w_in{layer}"] + net.params[f"b{layer}"]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((B, T, H))
        if keep_cache:
            gates = np.empty((B, T, 4 * H))
            cs = np.empty((B, T, H))
            tcs = np.empty((B, T, H))
        for t in range(T):
            z = zx[:, t] + h @ w_rec
            s = _sigmoid(z[:, :3 * H])
            g = np.tanh(z[:, 3 * H:])
            c = s[:, H:2 * H] * c + s[:, :H] * g
            tc = np.tanh(c)
            h = s[:, 2 * H:] * tc
            hs[:, t] = h
            if keep_cache:
                gates[:, t, :3 * H] = s
                gates[:, t, 3 * H:] = g
                cs[:, t] = c
                tcs[:, t] = tc
        if keep_cache:
            caches.append((layer_in, gates, cs, tcs, hs))
        layer_in = hs
    logits = layer_in @ net.params["w_out"] + net.params["b_out"]
    return logits, caches


def sequence_logliks(net: PolicyNet, seqs: Sequence[Sequence[int]], include_stop: bool = False) -> np.ndarray:
    ids, _ = _pad(seqs)
    if ids.shape[1] < 2:
        return np.zeros(len(seqs))
    logits, _ = _forward(net, ids[:, :-1], keep_cache=False)
    logp = _log_softmax(logits)
    picked = np.take_along_axis(logp, ids[:, 1:, None], axis=2)[..., 0]
    return (picked * score_mask(net, seqs, include_stop)).sum(axis=1)


def log_likelihood(net: PolicyNet, tokens: Sequence[int]) -> float:
    """Sum of body-token log-probabilities of one framed sequence."""
    return float(sequence_logliks(net, [tokens])[0])


def loglik_gradients(net: PolicyNet, seqs: Sequence[Sequence[int]], weights,
                     include_stop: bool = False) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Per-sequence log-likelihoods and the gradient of ``sum_b weights[b] * ll_b``.

    ``weights`` may be an array or a callable mapping the log-likelihoods to
    one (e.g. the derivative of a loss with respect to each ``ll_b``).
    """
    ids, _ = _pad(seqs)
    grads = {name: np.zeros(shape) for name, shape in net.shapes().items()}
    if ids.shape[1] < 2:
        return np.zeros(len(seqs)), grads
    inputs, targets = ids[:, :-1], ids[:, 1:]
    mask = score_mask(net, seqs, include_stop)
    B, T = inputs.shape
    H, V = net.hidden_dim, net.vocab_size
    logits, caches = _forward(net, inputs, keep_cache=True)
    logp = _log_softmax(logits)
    picked = np.take_along_axis(logp, targets[..., None], axis=2)[..., 0]
    ll = (picked * mask).sum(axis=1)

    if callable(weights):
        weights = weights(ll)
    coef = (np.asarray(weights, dtype=float)[:, None] * mask)[..., None]
    dlogits = -np.exp(logp) * coef
    np.put_along_axis(dlogits, targets[..., None],
                      np.take_along_axis(dlogits, targets[..., None], axis=2) + coef, axis=2)

    top = caches[-1][4]
    grads["w_out"] = top.reshape(-1, H).T @ dlogits.reshape(-1, V)
    grads["b_out"] = dlogits.sum(axis=(0, 1))
    dh_seq = dlogits @ net.params["w_out"].T

    for layer in reversed(range(net.layers)):
        layer_in, gates, cs, tcs, hs = caches[layer]
        w_rec = net.params[f"w_rec{layer}"]
        dz = np.empty((B, T, 4 * H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in reversed(range(T)):
            i = gates[:, t, :H]
            f = gates[:, t, H:2 * H]
            o = gates[:, t, 2 * H:3 * H]
            g = gates[:, t, 3 * H:]
            tc = tcs[:, t]
            c_prev = cs[:, t - 1] if t > 0 else np.zeros((B, H))
            dh = dh_seq[:, t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz[:, t, :H] = dc * g * i * (1.0 - i)
            dz[:, t, H:2 * H] = dc * c_prev * f * (1.0 - f)
            dz[:, t, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            dz[:, t, 3 * H:] = dc * i * (1.0 - g * g)
            dc_next = dc * f
            dh_next = dz[:, t] @ w_rec.T
        h_prev = np.concatenate([np.zeros((B, 1, H)), hs[:, :-1]], axis=1)
        flat_dz = dz.reshape(-1, 4 * H)
        grads[f"w_rec{layer}"] = h_prev.reshape(-1, H).T @ flat_dz
        grads[f"w_in{layer}"] = layer_in.reshape(-1, layer_in.shape[2]).T @ flat_dz
        grads[f"b{layer}"] = flat_dz.sum(axis=0)
        dh_seq = dz @ net.params[f"w_in{layer}"].T
    np.add.at(grads["embedding"], inputs.reshape(-1), dh_seq.reshape(-1, net.embed_dim))
    return ll, grads


# ---- sampling --------------------------------------------------------------

@dataclass
class Trajectory:
    tokens: list[int]
    agent_loglik: float
    prior_loglik: float = 0.0
    truncated: bool = False

    @property
    def body(self) -> list[int]:
        end = len(self.tokens) - (0 if self.truncated else 1)
        return self.tokens[1:end]


def sample_batch(net: PolicyNet, batch_size: int, t_max: int, rng: np.random.Generator) -> list[Trajectory]:
    """Roll out ``batch_size`` sequences of at most ``t_max`` sampled tokens each."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    tokens = [[net.start_id] for _ in range(batch_size)]
    loglik = np.zeros(batch_size)
    done = np.zeros(batch_size, dtype=bool)
    ids = np.full(batch_size, net.start_id)
    state = net.initial_state(batch_size)
    for _ in range(t_max):
        logits, state = net.step(ids, state)
        logp = _log_softmax(logits)
        cdf = np.cumsum(np.exp(logp), axis=1)
        u = rng.random(batch_size) * cdf[:, -1]
        ids = np.minimum((cdf < u[:, None]).sum(axis=1), net.vocab_size - 1)
        chosen = logp[np.arange(batch_size), ids]
        for b in np.flatnonzero(~done):
            tokens[b].append(int(ids[b]))
            if ids[b] == net.stop_id:
                done[b] = True
            else:
                loglik[b] += chosen[b]
        if done.all():
            break
    return [Trajectory(tokens[b], float(loglik[b]), truncated=not done[b]) for b in range(batch_size)]


def action_distribution(net: PolicyNet, prefix: Sequence[int]) -> np.ndarray:
    """Next-token probabilities after the framed prefix ``prefix``."""
    state = net.initial_state(1)
    logits = None
    for tok in prefix:
        logits, state = net.step(np.array([tok]), state)
    return np.exp(_log_softmax(logits))[0]


# ---- objective and optimisation --------------------------------------------

def augmented_targets(prior_ll: np.ndarray, shaped: np.ndarray, sigma: float) -> np.ndarray:
    return np.asarray(prior_ll, dtype=float) + sigma * np.asarray(shaped, dtype=float)


def loss(batch: Sequence[Trajectory], shaped: Sequence[float], prior: PolicyNet, agent: PolicyNet,
         sigma: float) -> float:
    """Mean squared gap between augmented prior likelihood and agent likelihood."""
    if len(batch) != len(shaped):
        raise ValueError("batch and shaped rewards differ in length")
    seqs = [t.tokens for t in batch]
    target = augmented_targets(sequence_logliks(prior, seqs), shaped, sigma)
    agent_ll = sequence_logliks(agent, seqs)
    return float(np.mean((target - agent_ll) ** 2))


def loss_and_gradients(batch: Sequence[Trajectory], shaped: Sequence[float], prior_ll: np.ndarray,
                       agent: PolicyNet, sigma: float) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    seqs = [t.tokens for t in batch]
    target = augmented_targets(prior_ll, shaped, sigma)
    agent_ll, grads = loglik_gradients(agent, seqs, lambda ll: -2.0 * (target - ll) / len(seqs))
    return float(np.mean((target - agent_ll) ** 2)), grads, agent_ll


@dataclass
class Adam:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def reset(self) -> None:
        self.t = 0
        self.m.clear()
        self.v.clear()

    def update(self, net: PolicyNet, grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient in {name}")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in net.param_names:
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            net.params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def gradient_step(agent: PolicyNet, optimizer: Adam, batch: Sequence[Trajectory], shaped: Sequence[float],
                  prior: PolicyNet, sigma: float, prior_ll: np.ndarray | None = None) -> float:
    """One Adam update of ``agent`` on the augmented-likelihood loss; returns the pre-update loss."""
    if prior_ll is None:
        prior_ll = sequence_logliks(prior, [t.tokens for t in batch])
    value, grads, _ = loss_and_gradients(batch, shaped, prior_ll, agent, sigma)
    if not math.isfinite(value):
        raise NonFiniteGradient("non-finite loss")
    optimizer.update(agent, grads)
    return value


# ---- pretraining -----------------------------------------------------------

def pretrain(corpus: Sequence[str], epochs: int, seed: int, vocab=DEFAULT_VOCAB, embed_dim: int = 32,
             hidden_dim: int = 64, layers: int = 2, lr: float = 1e-3, batch_size: int = 128,
             lr_decay: float = 1.0, log=None) -> PolicyNet:
    """Maximum-likelihood training with teacher forcing on molecule lines.

    The learning rate is multiplied by ``lr_decay`` after every epoch.
    """
    from .corpus import validate_corpus

    validate_corpus(corpus)
    net = PolicyNet.random(len(vocab), embed_dim, hidden_dim, layers, seed=seed,
                           start_id=vocab.start, stop_id=vocab.stop)
    encoded = [vocab.encode(s) for s in corpus]
    rng = np.random.default_rng(seed + 1)
    opt = Adam(lr=lr)
    for epoch in range(epochs):
        order = rng.permutation(len(encoded))
        total, count = 0.0, 0
        for lo in range(0, len(order), batch_size):
            seqs = [encoded[i] for i in order[lo:lo + batch_size]]
            n_tok = sum(len(s) - 1 for s in seqs)
            ll, grads = loglik_gradients(net, seqs, np.full(len(seqs), -1.0 / n_tok), include_stop=True)
            opt.update(net, grads)
            total -= ll.sum()
            count += n_tok
        if log is not None:
            log(f"epoch {epoch + 1}/{epochs}: nll/token {total / count:.4f}")
        opt.lr *= lr_decay
    return net


# ---- checkpoints -----------------------------------------------------------

def save_checkpoint(net: PolicyNet, path: str | Path) -> None:
    header = {
        "version": CHECKPOINT_VERSION,
        "vocab_size": net.vocab_size,
        "embed_dim": net.embed_dim,
        "hidden_dim": net.hidden_dim,
        "layers": net.layers,
        "start_id": net.start_id,
        "stop_id": net.stop_id,
        "hash_seed": net.hash_seed,
        "params": [[name, list(net.params[name].shape)] for name in net.param_names],
    }
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for name in net.param_names:
            fh.write(np.ascontiguousarray(net.params[name], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> PolicyNet:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} not found")
    with open(path, "rb") as fh:
        if fh.readline().rstrip(b"\n") != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a policy checkpoint")
        header = json.loads(fh.readline())
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {header.get('version')}")
        params = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape))
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise CheckpointError(f"{path} is truncated")
            params[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(float)
    return PolicyNet(header["vocab_size"], header["embed_dim"], header["hidden_dim"], header["layers"],
                     params, header["start_id"], header["stop_id"], header["hash_seed"])


# ---- sigma margin guard ------------------------------------------------------

@dataclass
class SigmaState:
    sigma: float = 128.0
    sigma_init: float = 128.0
    step: int = 0
    gap_sum: float = 0.0
    gap_count: int = 0
    reward_sum: float = 0.0
    reward_count: int = 0

    @property
    def delta(self) -> float:
        return self.gap_sum / self.gap_count if self.gap_count else 0.0

    @property
    def mean_reward(self) -> float:
        return self.reward_sum / self.reward_count if self.reward_count else 0.0


def sigma_update(state: SigmaState, augmented_ll: Sequence[float], agent_ll: Sequence[float],
                 extrinsic: Sequence[float], margin: float = 50.0, window: int = 10,
                 min_score: float = 0.15) -> tuple[SigmaState, bool]:
    """Fold one step's molecules into the running gap and apply the margin guard.

    Returns the new state and whether the agent must be reset to the prior.
    After a reset the running statistics and step count start afresh.
    """
    gaps = np.asarray(augmented_ll, dtype=float) - np.asarray(agent_ll, dtype=float)
    new = SigmaState(
        sigma=state.sigma,
        sigma_init=state.sigma_init,
        step=state.step + 1,
        gap_sum=state.gap_sum + float(gaps.sum()),
        gap_count=state.gap_count + len(gaps),
        reward_sum=state.reward_sum + float(np.sum(extrinsic)),
        reward_count=state.reward_count + len(extrinsic),
    )
    if new.step < window or new.delta <= margin:
        return new, False
    score = max(new.mean_reward, min_score)
    sigma = max(new.sigma, new.delta / score) + margin
    return SigmaState(sigma=sigma, sigma_init=state.sigma_init), True
