import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from divmol.chem import Fingerprint
from divmol.corpus import generate_corpus
from divmol.diversity import (
    count_scaffolds,
    distance_matrix,
    diverse_actives_count,
    is_packing,
    packing_exact,
    recount_scaffolds,
)
from divmol.shaping import ScaffoldMemory, ShapingParams, shape_batch


def test_empty_memory():
    mem = ScaffoldMemory()
    assert count_scaffolds(mem) == (0, 0)
    assert diverse_actives_count(mem) == 0


def test_two_molecular_one_topological():
    mem = ScaffoldMemory()
    shape_batch("none", ShapingParams(), mem, ["C1CCNCC1C", "C1CCOCC1C"], [0.9, 0.9])
    assert count_scaffolds(mem) == (2, 1)


def test_sentinel_counts_once():
    mem = ScaffoldMemory()
    shape_batch("none", ShapingParams(), mem, ["CCO", "CCCN", "C1CC1"], [0.9, 0.9, 0.9])
    assert count_scaffolds(mem) == (2, 2)


def test_one_active_and_close_neighbour():
    mem = ScaffoldMemory()
    shape_batch("none", ShapingParams(), mem, ["C1CCC(CCO)CC1"], [0.9])
    assert diverse_actives_count(mem) == 1
    shape_batch("none", ShapingParams(), mem, ["C1CCC(CCCO)CC1"], [0.9])
    assert diverse_actives_count(mem) == 1


def test_counts_grow_monotonically_and_match_recount():
    mem = ScaffoldMemory()
    rng = np.random.default_rng(0)
    last = (0, 0, 0)
    for k in range(6):
        mols = generate_corpus(20, seed=100 + k)
        shape_batch("none", ShapingParams(), mem, mols, rng.random(20))
        now = (*count_scaffolds(mem), diverse_actives_count(mem))
        assert all(b >= a for a, b in zip(last, now))
        assert count_scaffolds(mem) == recount_scaffolds(mem.actives)
        last = now


def _fps_with_distances():
    # 1 and 2 overlap heavily; everything else is disjoint
    return [
        Fingerprint.from_bits(range(0, 10)),
        Fingerprint.from_bits(range(0, 7)),
        Fingerprint.from_bits(range(20, 30)),
        Fingerprint.from_bits(range(40, 50)),
    ]


def test_exact_packing_examples():
    fps = _fps_with_distances()
    dist = distance_matrix(fps)
    assert abs(dist[0, 1] - 0.3) < 1e-12
    assert packing_exact(fps, 0.7) == 3
    same = [Fingerprint.from_bits([1, 2, 3])] * 5
    assert packing_exact(same, 0.7) == 1
    apart = [Fingerprint.from_bits(range(10 * k, 10 * k + 10)) for k in range(6)]
    assert packing_exact(apart, 0.7) == 6
    assert packing_exact([], 0.7) == 0


def _random_fps(rng, n):
    base = rng.integers(0, 64, size=(4, 12))
    fps = []
    for _ in range(n):
        parent = base[rng.integers(4)]
        keep = parent[rng.random(12) < 0.7]
        extra = rng.integers(0, 64, size=rng.integers(0, 5))
        fps.append(Fingerprint.from_bits(list(keep) + list(extra) or [0]))
    return fps


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12))
def test_greedy_never_beats_exact(seed, n):
    fps = _random_fps(np.random.default_rng(seed), n)
    mem = ScaffoldMemory(d=0.7)
    for fp in fps:
        mem.add_diverse(fp)
    assert is_packing(mem.diverse, 0.7)
    assert len(mem.diverse) <= packing_exact(fps, 0.7)
