"""Scaffold memory and diversity-aware reward shaping.

The shaped reward of a molecule is ``f * R + R_I``: ``f`` penalises actives
whose molecular scaffold is already crowded in memory, ``R_I`` is an
additive exploration bonus. Only actives (``R >= h``) are ever modified;
repeated actives get zero and invalid molecules keep their ``-1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chem import (
    Fingerprint,
    MolGraph,
    ParseError,
    canonical_string,
    fingerprint,
    molecular_scaffold,
    parse,
    tanimoto_distances,
    topological_scaffold,
)
from .oracle import INVALID_REWARD


class Strategy(str, enum.Enum):
    NONE = "none"
    IMS = "ims"
    ERF_IMS = "erf_ims"
    LIN_IMS = "lin_ims"
    SIG_IMS = "sig_ims"
    TANH_IMS = "tanh_ims"
    DA = "da"
    MIN_DIS = "min_dis"
    MEAN_DIS = "mean_dis"
    MIN_DIS_R = "min_dis_r"
    MEAN_DIS_R = "mean_dis_r"
    KL_UCB = "kl_ucb"
    RND = "rnd"
    INF = "inf"
    TANH_RND = "tanh_rnd"
    TANH_INF = "tanh_inf"

    @property
    def uses_rnd(self) -> bool:
        return self in (Strategy.RND, Strategy.TANH_RND)


PENALIZED = {
    Strategy.IMS, Strategy.ERF_IMS, Strategy.LIN_IMS, Strategy.SIG_IMS, Strategy.TANH_IMS,
    Strategy.TANH_RND, Strategy.TANH_INF,
}


@dataclass(frozen=True)
class ShapingParams:
    h: float = 0.5
    m: int = 25
    d: float = 0.7
    c: float = 0.0
    c_tanh: float = 3.0
    coreset_size: int = 5000

    def __post_init__(self):
        if not 0.0 < self.h < 1.0:
            raise ValueError("h must lie in (0, 1)")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not 0.0 < self.d <= 1.0:
            raise ValueError("d must lie in (0, 1]")


# ---- penalties -------------------------------------------------------------

def penalty_ims(n: int, m: int) -> float:
    return 0.0 if n >= m else 1.0


def penalty_erf(n: int, m: int) -> float:
    return 1.0 + math.erf(math.sqrt(math.pi) / m) - math.erf(math.sqrt(math.pi) * n / m)


def penalty_linear(n: int, m: int) -> float:
    return max(0.0, 1.0 - n / m)


def penalty_sigmoid(n: int, m: int) -> float:
    x = (2.0 * n / m - 1.0) / 0.15
    # 1 - logistic(x) == logistic(-x), written to stay finite for large |x|
    if x >= 0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def penalty_tanh(n: int, m: int, c_tanh: float = 3.0) -> float:
    return 1.0 - math.tanh(c_tanh * (n - 1) / m)


def penalty(strategy: Strategy, n: int, params: ShapingParams) -> float:
    if strategy is Strategy.IMS:
        return penalty_ims(n, params.m)
    if strategy is Strategy.ERF_IMS:
        return penalty_erf(n, params.m)
    if strategy is Strategy.LIN_IMS:
        return penalty_linear(n, params.m)
    if strategy is Strategy.SIG_IMS:
        return penalty_sigmoid(n, params.m)
    if strategy in (Strategy.TANH_IMS, Strategy.TANH_RND, Strategy.TANH_INF):
        return penalty_tanh(n, params.m, params.c_tanh)
    return 1.0


# ---- KL-UCB ------------------------------------------------------------------

class DomainError(ValueError):
    pass


def bernoulli_kl(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q) with limit cases."""
    if q >= 1.0:
        return 0.0 if p >= 1.0 else math.inf
    if q <= 0.0:
        return 0.0 if p <= 0.0 else math.inf
    if p <= 0.0:
        return -math.log1p(-q)
    if p >= 1.0:
        return -math.log(q)
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


def klucb_solve(p_hat: float, n_arm: int, n: int, c: float = 0.0, tol: float = 1e-6) -> float:
    """Largest ``q`` in ``[p_hat, 1]`` with ``n_arm * KL(p_hat, q) <= log n + c log log n``."""
    if n_arm < 1:
        raise DomainError("arm count must be >= 1")
    if n < 1 or (c != 0 and n < 2):
        raise DomainError("log log n is undefined for n < 2")
    if c != 0 and math.log(n) <= 0:
        raise DomainError("log log n is undefined for n < 2")
    bound = math.log(n) + (c * math.log(math.log(n)) if c != 0 else 0.0)
    p_hat = min(max(p_hat, 0.0), 1.0)
    if p_hat >= 1.0:
        return 1.0
    lo, hi = p_hat, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if n_arm * bernoulli_kl(p_hat, mid) <= bound:
            lo = mid
        else:
            hi = mid
    return lo


# ---- memory --------------------------------------------------------------------

@dataclass
class Active:
    canonical: str
    scaffold: str
    topological: str
    fingerprint: Fingerprint
    reward: float
    tokens: str


class ScaffoldMemory:
    """Per-scaffold counts and reward sums plus the active and diverse sets."""

    def __init__(self, d: float = 0.7, radius: int = 2, nbits: int = 2048, hash_seed: int | None = None):
        self.d = d
        self.radius = radius
        self.nbits = nbits
        self.hash_seed = hash_seed
        self.counts: dict[str, int] = {}
        self.sums: dict[str, float] = {}
        self.topological: set[str] = set()
        self.actives: list[Active] = []
        self.seen: set[str] = set()
        self.diverse: list[Fingerprint] = []
        self._diverse_matrix = np.zeros((0, nbits // 64), dtype=np.uint64)
        self.n_total = 0

    def fingerprint(self, g: MolGraph) -> Fingerprint:
        if self.hash_seed is None:
            return fingerprint(g, self.radius, self.nbits)
        return fingerprint(g, self.radius, self.nbits, self.hash_seed)

    @property
    def diverse_matrix(self) -> np.ndarray:
        return self._diverse_matrix

    def insert(self, active: Active) -> int:
        """Record a new active; returns the post-insertion count of its scaffold."""
        self.seen.add(active.canonical)
        self.actives.append(active)
        self.counts[active.scaffold] = self.counts.get(active.scaffold, 0) + 1
        self.sums[active.scaffold] = self.sums.get(active.scaffold, 0.0) + active.reward
        self.topological.add(active.topological)
        return self.counts[active.scaffold]

    def add_diverse(self, fp: Fingerprint) -> bool:
        """Greedy packing step: keep ``fp`` iff it is at least ``d`` from every kept one."""
        if len(self.diverse) and tanimoto_distances(fp, self._diverse_matrix).min() < self.d:
            return False
        self.diverse.append(fp)
        self._diverse_matrix = np.vstack([self._diverse_matrix, fp.words[None, :]])
        return True


def greedy_insertions(existing: np.ndarray, fps: Sequence[Fingerprint], d: float) -> list[bool]:
    """Which of ``fps`` a greedy pass would add to the packing ``existing``."""
    matrix = existing
    added = []
    for fp in fps:
        ok = len(matrix) == 0 or tanimoto_distances(fp, matrix).min() >= d
        if ok:
            matrix = np.vstack([matrix, fp.words[None, :]])
        added.append(ok)
    return added


# ---- intrinsic rewards -----------------------------------------------------------

def _reference_distances(fp: Fingerprint, base: np.ndarray, others: Sequence[Fingerprint]) -> np.ndarray:
    parts = [tanimoto_distances(fp, base)] if len(base) else []
    if others:
        parts.append(tanimoto_distances(fp, np.stack([o.words for o in others])))
    return np.concatenate(parts) if parts else np.zeros(0)


def min_distance(fp: Fingerprint, base: np.ndarray, others: Sequence[Fingerprint]) -> float:
    d = _reference_distances(fp, base, others)
    return float(d.min()) if len(d) else 1.0


def mean_distance(fp: Fingerprint, base: np.ndarray, others: Sequence[Fingerprint]) -> float:
    d = _reference_distances(fp, base, others)
    return float(d.mean()) if len(d) else 1.0


def intrinsic_da(memory: ScaffoldMemory, batch_fps: Sequence[Fingerprint]) -> int:
    """Number of batch actives a greedy pass would add to the diverse set."""
    return sum(greedy_insertions(memory.diverse_matrix, batch_fps, memory.d))


def intrinsic_mindis(memory: ScaffoldMemory, index: int, batch_fps: Sequence[Fingerprint]) -> float:
    others = [f for j, f in enumerate(batch_fps) if j != index]
    return min_distance(batch_fps[index], memory.diverse_matrix, others)


def intrinsic_meandis(memory: ScaffoldMemory, index: int, batch_fps: Sequence[Fingerprint]) -> float:
    others = [f for j, f in enumerate(batch_fps) if j != index]
    return mean_distance(batch_fps[index], memory.diverse_matrix, others)


def sample_coreset(actives: Sequence[Active], size: int, rng: np.random.Generator) -> np.ndarray:
    """Fingerprint matrix of up to ``size`` actives drawn without replacement."""
    if not actives:
        return np.zeros((0, 32), dtype=np.uint64)
    if len(actives) <= size:
        chosen = range(len(actives))
    else:
        chosen = sorted(rng.choice(len(actives), size=size, replace=False))
    return np.stack([actives[i].fingerprint.words for i in chosen])


def intrinsic_mindisr(coreset: np.ndarray, index: int, batch_fps: Sequence[Fingerprint]) -> float:
    others = [f for j, f in enumerate(batch_fps) if j != index]
    return min_distance(batch_fps[index], coreset, others)


def intrinsic_meandisr(coreset: np.ndarray, index: int, batch_fps: Sequence[Fingerprint]) -> float:
    others = [f for j, f in enumerate(batch_fps) if j != index]
    return mean_distance(batch_fps[index], coreset, others)


def intrinsic_klucb(memory: ScaffoldMemory, scaffold: str, c: float = 0.0) -> float:
    n_arm = memory.counts[scaffold]
    return klucb_solve(memory.sums[scaffold] / n_arm, n_arm, memory.n_total, c)


def scaffold_information(memory: ScaffoldMemory, scaffold: str) -> float:
    """``-log(N[S] / |scaffolds|)`` clamped below at zero."""
    p = memory.counts[scaffold] / len(memory.counts)
    return max(0.0, -math.log(p))


def minmax(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return v
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def intrinsic_inf(memory: ScaffoldMemory, scaffolds: Sequence[str]) -> np.ndarray:
    """Scaffold information of each batch active, min-max scaled when there are more than two."""
    info = [scaffold_information(memory, s) for s in scaffolds]
    if len(info) > 2:
        return minmax(info)
    return np.asarray(info, dtype=float)


# ---- batch shaping -------------------------------------------------------------

@dataclass
class ShapeResult:
    shaped: np.ndarray
    active: np.ndarray  # new (non-duplicate) actives
    duplicate: np.ndarray
    valid: np.ndarray
    new_actives: list[Active] = field(default_factory=list)


def _as_graph(mol) -> MolGraph | None:
    if mol is None or isinstance(mol, MolGraph):
        return mol
    try:
        return parse(mol)
    except ParseError:
        return None


def shape_batch(strategy: Strategy | str, params: ShapingParams, memory: ScaffoldMemory,
                molecules: Sequence, rewards: Sequence[float], rng: np.random.Generator | None = None,
                rnd=None, texts: Sequence[str | None] | None = None) -> ShapeResult:
    """Shape one generative step's rewards and fold its actives into ``memory``.

    ``molecules`` are glyph strings (or pre-parsed graphs with ``None`` for
    invalid ones) in generation order. ``memory`` is updated in place.
    ``rnd`` is an :class:`~divmol.rnd.RndState`, required by the RND
    strategies; ``rng`` drives the random coreset of MinDisR/MeanDisR.
    ``texts`` optionally carries the generated glyph strings when
    ``molecules`` holds graphs, so RND scores what was actually sampled.
    """
    strategy = Strategy(strategy)
    if len(molecules) != len(rewards):
        raise ValueError("molecules and rewards differ in length")
    n = len(rewards)
    rewards = np.asarray(rewards, dtype=float)
    shaped = rewards.copy()
    valid = np.zeros(n, dtype=bool)
    active = np.zeros(n, dtype=bool)
    duplicate = np.zeros(n, dtype=bool)
    if strategy.uses_rnd and rnd is None:
        raise ValueError(f"strategy {strategy.value} needs an RND state")

    coreset = None
    if strategy in (Strategy.MIN_DIS_R, Strategy.MEAN_DIS_R):
        coreset = sample_coreset(memory.actives, params.coreset_size, rng or np.random.default_rng(0))

    memory.n_total += n
    batch: list[tuple[int, Active]] = []
    for i, (mol, r) in enumerate(zip(molecules, rewards)):
        g = _as_graph(mol)
        if g is None or r == INVALID_REWARD:
            continue
        valid[i] = True
        if r < params.h:
            continue
        canonical = canonical_string(g)
        if canonical in memory.seen:
            duplicate[i] = True
            shaped[i] = 0.0
            continue
        item = Active(
            canonical=canonical,
            scaffold=molecular_scaffold(g).canonical,
            topological=topological_scaffold(g).canonical,
            fingerprint=memory.fingerprint(g),
            reward=float(r),
            tokens=texts[i] if texts is not None else (mol if isinstance(mol, str) else canonical),
        )
        count = memory.insert(item)
        active[i] = True
        batch.append((i, item))
        if strategy in PENALIZED:
            shaped[i] = max(0.0, penalty(strategy, count, params) * r)

    idx = [i for i, _ in batch]
    fps = [a.fingerprint for _, a in batch]
    if batch:
        if strategy is Strategy.DA:
            shaped[idx] += intrinsic_da(memory, fps)
        elif strategy is Strategy.MIN_DIS:
            shaped[idx] += [intrinsic_mindis(memory, k, fps) for k in range(len(fps))]
        elif strategy is Strategy.MEAN_DIS:
            shaped[idx] += [intrinsic_meandis(memory, k, fps) for k in range(len(fps))]
        elif strategy is Strategy.MIN_DIS_R:
            shaped[idx] += [intrinsic_mindisr(coreset, k, fps) for k in range(len(fps))]
        elif strategy is Strategy.MEAN_DIS_R:
            shaped[idx] += [intrinsic_meandisr(coreset, k, fps) for k in range(len(fps))]
        elif strategy is Strategy.KL_UCB:
            shaped[idx] = [intrinsic_klucb(memory, a.scaffold, params.c) for _, a in batch]
        elif strategy in (Strategy.INF, Strategy.TANH_INF):
            shaped[idx] += intrinsic_inf(memory, [a.scaffold for _, a in batch])
        elif strategy.uses_rnd:
            from .rnd import rnd_deltas, rnd_rescale

            shaped[idx] += rnd_rescale(rnd_deltas(rnd, [a.tokens for _, a in batch]))

    for fp in fps:
        memory.add_diverse(fp)
    return ShapeResult(shaped, active, duplicate, valid, [a for _, a in batch])
