"""Diversity-aware reinforcement learning for string-based molecule generation."""

from .chem import MolGraph, canonical_string, fingerprint, molecular_scaffold, parse, tanimoto_distance
from .oracle import OracleSpec, builtin_oracles, load_oracle
from .policy import PolicyNet, load_checkpoint, pretrain, save_checkpoint
from .runner import RunConfig, compare, run, run_single
from .shaping import ScaffoldMemory, ShapingParams, Strategy, shape_batch

__version__ = "0.1.0"

__all__ = [
    "MolGraph", "OracleSpec", "PolicyNet", "RunConfig", "ScaffoldMemory", "ShapingParams", "Strategy",
    "builtin_oracles", "canonical_string", "compare", "fingerprint", "load_checkpoint", "load_oracle",
    "molecular_scaffold", "parse", "pretrain", "run", "run_single", "save_checkpoint", "shape_batch",
    "tanimoto_distance",
]
