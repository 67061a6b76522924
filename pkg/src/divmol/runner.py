"""Experiment loop: config parsing, seeded reruns, per-step CSV logging and comparisons.

One generative step samples a batch from the agent, scores it with the
oracle, shapes the rewards through the scaffold memory, takes one gradient
step on the augmented-likelihood loss, applies the margin guard, and
appends a row of cumulative diversity metrics.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import multiprocessing
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .chem import DEFAULT_VOCAB, parse, ParseError
from .diversity import count_scaffolds, diverse_actives_count
from .oracle import INVALID_REWARD, OracleError, load_oracle
from .policy import (
    Adam,
    CheckpointError,
    NonFiniteGradient,
    PolicyNet,
    SigmaState,
    load_checkpoint,
    loss_and_gradients,
    sample_batch,
    save_checkpoint,
    sequence_logliks,
    sigma_update,
)
from .rnd import RndState, rnd_train
from .shaping import ScaffoldMemory, ShapingParams, Strategy, shape_batch

CSV_HEADER = (
    "step", "mean_extrinsic", "mean_shaped", "actives", "mol_scaffolds",
    "topo_scaffolds", "diverse_actives", "sigma", "loss", "valid_frac",
)
CUMULATIVE = ("actives", "mol_scaffolds", "topo_scaffolds", "diverse_actives")


class ConfigError(ValueError):
    pass


class CheckpointMissing(FileNotFoundError):
    pass


@dataclass
class RunConfig:
    oracle: str = "dense-easy"
    strategy: str = "none"
    steps: int = 300
    batch_size: int = 32
    t_max: int = 40
    seed: int = 0
    reruns: int = 10
    h: float = 0.5
    m: int = 25
    d: float = 0.7
    c: float = 0.0
    c_tanh: float = 3.0
    coreset_size: int = 5000
    embed_dim: int = 32
    hidden_dim: int = 64
    layers: int = 2
    lr: float = 2e-4
    rnd_lr: float = 1e-4
    sigma_init: float = 128.0
    sigma_margin: float = 50.0
    sigma_window: int = 10
    sigma_min_score: float = 0.15
    prior: str = "prior.ckpt"
    output_dir: str = "runs"
    workers: int = 1
    save_agent: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("steps", "batch_size", "t_max", "reruns", "m", "coreset_size", "embed_dim",
                     "hidden_dim", "layers", "sigma_window", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("lr", "rnd_lr", "sigma_init", "sigma_margin", "sigma_min_score", "c_tanh"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.seed < 0 or self.c < 0:
            raise ConfigError("seed and c must be non-negative")
        try:
            self.params()
            Strategy(self.strategy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.oracle.startswith("file:"):
            try:
                load_oracle(self.oracle)
            except OracleError as exc:
                raise ConfigError(str(exc)) from None

    def params(self) -> ShapingParams:
        return ShapingParams(h=self.h, m=self.m, d=self.d, c=self.c, c_tanh=self.c_tanh,
                             coreset_size=self.coreset_size)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def label(self) -> str:
        return self.strategy


def _coerce(name: str, raw: str, kind: type):
    try:
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot read {raw!r} as {kind.__name__}") from None


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Read ``key = value`` lines; ``#`` starts a comment and unknown keys are errors."""
    kinds = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    types = {"int": int, "float": float, "str": str, "bool": bool}
    values = dataclasses.asdict(base) if base is not None else {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value, types[kinds[key]])
    return RunConfig(**values)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(encoding="utf-8"))


def dump_config(config: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in dataclasses.asdict(config).items())


# ---- a single run ----------------------------------------------------------

@dataclass
class StepRecord:
    step: int
    mean_extrinsic: float
    mean_shaped: float
    actives: int
    mol_scaffolds: int
    topo_scaffolds: int
    diverse_actives: int
    sigma: float
    loss: float
    valid_frac: float

    def row(self) -> list[str]:
        return [str(self.step), repr(self.mean_extrinsic), repr(self.mean_shaped), str(self.actives),
                str(self.mol_scaffolds), str(self.topo_scaffolds), str(self.diverse_actives),
                repr(self.sigma), repr(self.loss), repr(self.valid_frac)]


@dataclass
class RunResult:
    seed: int
    records: list[StepRecord] = field(default_factory=list)
    error: str | None = None
    resets: int = 0
    csv_path: str | None = None

    @property
    def final(self) -> StepRecord | None:
        return self.records[-1] if self.records else None

    def summary(self) -> dict[str, float]:
        last = self.final
        if last is None:
            return {"actives": 0, "mol_scaffolds": 0, "topo_scaffolds": 0, "diverse_actives": 0}
        return {k: getattr(last, k) for k in CUMULATIVE}


def _decode(tokens: Sequence[int]) -> str:
    return "".join(DEFAULT_VOCAB.decode(tokens))


def _score(oracle, molecules: Sequence[str | None]) -> tuple[list, np.ndarray]:
    graphs, rewards = [], np.empty(len(molecules))
    for i, mol in enumerate(molecules):
        g = None
        if mol is not None:
            try:
                g = parse(mol)
            except ParseError:
                g = None
        graphs.append(g)
        rewards[i] = INVALID_REWARD if g is None else oracle.score_graph(g)
    return graphs, rewards


class Experiment:
    """Mutable state of one seeded run; ``step()`` advances one generative step."""

    def __init__(self, config: RunConfig, prior: PolicyNet, seed: int):
        self.config = config
        self.prior = prior
        self.agent = prior.copy()
        self.optimizer = Adam(lr=config.lr)
        self.oracle = load_oracle(config.oracle)
        self.strategy = Strategy(config.strategy)
        self.params = config.params()
        self.memory = ScaffoldMemory(d=config.d)
        self.sigma = SigmaState(sigma=config.sigma_init, sigma_init=config.sigma_init)
        self.rng = np.random.default_rng(seed)
        self.rnd = RndState.create(prior, seed=seed + 7919, lr=config.rnd_lr) if self.strategy.uses_rnd else None
        self.step_index = 0
        self.resets = 0

    def step(self) -> StepRecord:
        cfg = self.config
        batch = sample_batch(self.agent, cfg.batch_size, cfg.t_max, self.rng)
        molecules = [None if t.truncated else _decode(t.body) for t in batch]
        graphs, extrinsic = _score(self.oracle, molecules)
        shaped_res = shape_batch(self.strategy, self.params, self.memory, graphs, extrinsic,
                                 rng=self.rng, rnd=self.rnd, texts=molecules)
        shaped = shaped_res.shaped
        seqs = [t.tokens for t in batch]
        prior_ll = sequence_logliks(self.prior, seqs)
        agent_ll = np.array([t.agent_loglik for t in batch])
        sigma = self.sigma.sigma
        value, grads, _ = loss_and_gradients(batch, shaped, prior_ll, self.agent, sigma)
        if not np.isfinite(value):
            raise NonFiniteGradient("non-finite loss", self.step_index + 1)
        try:
            self.optimizer.update(self.agent, grads)
        except NonFiniteGradient as exc:
            raise NonFiniteGradient(str(exc), self.step_index + 1) from None
        if self.rnd is not None:
            rnd_train(self.rnd, [a.tokens for a in shaped_res.new_actives])
        self.sigma, reset = sigma_update(
            self.sigma, prior_ll + sigma * shaped, agent_ll, np.maximum(extrinsic, 0.0),
            margin=cfg.sigma_margin, window=cfg.sigma_window, min_score=cfg.sigma_min_score,
        )
        if reset:
            self.agent.load_state(self.prior)
            self.optimizer.reset()
            self.resets += 1
        self.step_index += 1
        mol, topo = count_scaffolds(self.memory)
        return StepRecord(
            step=self.step_index,
            mean_extrinsic=float(extrinsic.mean()),
            mean_shaped=float(shaped.mean()),
            actives=len(self.memory.actives),
            mol_scaffolds=mol,
            topo_scaffolds=topo,
            diverse_actives=diverse_actives_count(self.memory),
            sigma=float(self.sigma.sigma),
            loss=value,
            valid_frac=float(shaped_res.valid.mean()),
        )


def write_csv(records: Sequence[StepRecord], out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(rec.row())


def read_csv(path: str | Path) -> list[dict[str, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def run_single(config: RunConfig, prior: PolicyNet, seed: int, csv_path: str | Path | None = None) -> RunResult:
    """Run ``config.steps`` generative steps; rows are flushed as they are produced.

    A non-finite gradient stops the run; completed rows stay in the CSV and
    the error is kept on the result.
    """
    exp = Experiment(config, prior, seed)
    result = RunResult(seed=seed, csv_path=str(csv_path) if csv_path else None)
    fh = open(csv_path, "w", newline="", encoding="utf-8") if csv_path else io.StringIO()
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for _ in range(config.steps):
            try:
                rec = exp.step()
            except NonFiniteGradient as exc:
                result.error = f"step {exc.step}: {exc}"
                break
            result.records.append(rec)
            writer.writerow(rec.row())
            fh.flush()
    finally:
        fh.close()
    result.resets = exp.resets
    if config.save_agent and csv_path:
        save_checkpoint(exp.agent, Path(csv_path).with_suffix(".ckpt"))
    return result


def resolve_prior(config: RunConfig) -> PolicyNet:
    path = Path(config.prior)
    if not path.exists():
        raise CheckpointMissing(f"prior checkpoint {path} not found; run 'pretrain' first")
    try:
        prior = load_checkpoint(path)
    except CheckpointError as exc:
        raise ConfigError(str(exc)) from None
    dims = (prior.embed_dim, prior.hidden_dim, prior.layers)
    if dims != (config.embed_dim, config.hidden_dim, config.layers):
        raise ConfigError(f"prior has dims {dims}, config asks for "
                          f"{(config.embed_dim, config.hidden_dim, config.layers)}")
    return prior


def _worker(args) -> RunResult:
    config, prior, seed, csv_path = args
    return run_single(config, prior, seed, csv_path)


def _pool_map(jobs: list, workers: int) -> list[RunResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [_worker(j) for j in jobs]
    ctx = multiprocessing.get_context("fork" if hasattr(os, "fork") else "spawn")
    with ctx.Pool(min(workers, len(jobs))) as pool:
        return pool.map(_worker, jobs, chunksize=1)


def run(config: RunConfig, prior: PolicyNet | None = None, write: bool = True) -> list[RunResult]:
    """All reruns of one config (seeds ``seed + k``), plus ``summary.csv`` in the output directory."""
    prior = prior if prior is not None else resolve_prior(config)
    out = Path(config.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(dump_config(config), encoding="utf-8")
    jobs = [(config, prior, config.seed + k, out / f"{config.label}_seed{config.seed + k}.csv" if write else None)
            for k in range(config.reruns)]
    results = _pool_map(jobs, config.workers)
    if write:
        with open(out / f"{config.label}_summary.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "steps", *CUMULATIVE, "resets", "error"])
            for r in results:
                s = r.summary()
                w.writerow([r.seed, len(r.records), *(s[k] for k in CUMULATIVE), r.resets, r.error or ""])
    return results


# ---- comparison --------------------------------------------------------------

def moving_average(series: Sequence[float], window: int = 101) -> np.ndarray:
    """Trailing mean; the first points average over what is available."""
    x = np.asarray(series, dtype=float)
    if len(x) == 0:
        return x
    w = max(1, min(window, len(x)))
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - w, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def describe(values: Sequence[float]) -> dict[str, float]:
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "mean": float(v.mean()), "iqr": float(q3 - q1),
            "q1": float(q1), "q3": float(q3), "min": float(v.min()), "max": float(v.max())}


@dataclass
class Comparison:
    labels: list[str]
    results: dict[str, list[RunResult]]

    def metric(self, label: str, name: str) -> list[float]:
        return [r.summary()[name] for r in self.results[label]]

    def reward_curve(self, label: str, window: int = 101) -> np.ndarray:
        runs = [[rec.mean_extrinsic for rec in r.records] for r in self.results[label]]
        n = min(len(x) for x in runs)
        mean = np.mean([x[:n] for x in runs], axis=0) if n else np.zeros(0)
        return moving_average(mean, window)

    def table(self) -> list[list]:
        rows = []
        for label in self.labels:
            for name in CUMULATIVE[1:]:
                s = describe(self.metric(label, name))
                rows.append([label, name, s["median"], s["mean"], s["iqr"]])
        return rows


def compare(configs: Sequence[RunConfig], prior: PolicyNet | None = None, output_dir: str | Path | None = None,
            window: int = 101) -> Comparison:
    """Run every config's reruns and summarise the diversity metrics per strategy."""
    labels, results = [], {}
    for cfg in configs:
        label = cfg.label
        while label in results:
            label += "'"
        labels.append(label)
        if output_dir is not None:
            cfg = cfg.replace(output_dir=str(Path(output_dir) / label))
        results[label] = run(cfg, prior if prior is not None else resolve_prior(cfg), write=output_dir is not None)
    cmp = Comparison(labels, results)
    if output_dir is not None:
        write_comparison(cmp, output_dir, window)
    return cmp


def write_comparison(cmp: Comparison, output_dir: str | Path, window: int = 101) -> None:
    from .plots import box_chart, line_chart

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "metric", "median", "mean", "iqr"])
        w.writerows(cmp.table())
    curves = {label: cmp.reward_curve(label, window) for label in cmp.labels}
    with open(out / "reward_curves.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", *cmp.labels])
        n = min((len(c) for c in curves.values()), default=0)
        for i in range(n):
            w.writerow([i + 1, *(repr(float(curves[lab][i])) for lab in cmp.labels)])
    (out / "reward.svg").write_text(line_chart(curves, title="extrinsic reward (moving average)"), encoding="utf-8")
    for name in CUMULATIVE[1:]:
        data = {label: cmp.metric(label, name) for label in cmp.labels}
        (out / f"{name}.svg").write_text(box_chart(data, title=name), encoding="utf-8")
