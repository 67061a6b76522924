import numpy as np
import pytest

from divmol.chem import parse
from divmol.corpus import generate_corpus
from divmol.oracle import (
    INVALID_REWARD,
    FeaturePredicate,
    OracleError,
    OracleSpec,
    builtin_oracles,
    evaluate,
    load_oracle,
    parse_oracle_file,
)


def _f(kind, *args, weight=1.0):
    return FeaturePredicate(kind, tuple(args)), weight


def test_invalid_is_minus_one():
    spec = builtin_oracles()["dense-easy"]
    assert evaluate(spec, "C1CC") == INVALID_REWARD == -1.0
    assert evaluate(spec, "") == -1.0


def test_dense_all_matched():
    spec = OracleSpec((_f("contains_element", "O"), _f("ring_of_size", 6)), mode="dense")
    assert evaluate(spec, "C1CCCCC1O") == 1.0


def test_dense_weighted_fraction():
    spec = OracleSpec((_f("contains_element", "O", weight=2), _f("contains_element", "N"),
                       _f("contains_element", "S")))
    assert evaluate(spec, "CCO") == pytest.approx(2 / 4)


def test_sparse_partial_and_full():
    spec = builtin_oracles()["sparse-hard"]
    n = len(spec.features)
    # five-ring, six-ring, S and N in a 17-atom molecule
    full = "C1CC(CS1)C1CCC(=CN1)CCCCCC"
    g = parse(full)
    assert all(pred(g) for pred, _ in spec.features)
    assert evaluate(spec, full) == 1.0
    missing_s = "C1CC(CC1)C1CCC(=CN1)CCCCCCC"
    g = parse(missing_s)
    k = sum(pred(g) for pred, _ in spec.features)
    assert k == n - 1
    assert evaluate(spec, missing_s) == pytest.approx(0.2 * k / n)
    assert evaluate(spec, missing_s) < 0.5


def test_dense_codomain_on_corpus():
    spec = builtin_oracles()["dense-easy"]
    for s in generate_corpus(200, seed=3):
        assert 0.0 <= evaluate(spec, s) <= 1.0


def test_dense_monotone_in_matches():
    spec = builtin_oracles()["dense-easy"]
    assert evaluate(spec, "C1CCCCC1") <= evaluate(spec, "C1CCCCC1O") <= evaluate(spec, "C1CCCCC1OF")


def test_predicates():
    g = parse("C1CCCC1C#N")
    assert FeaturePredicate("ring_of_size", (5,))(g)
    assert not FeaturePredicate("ring_of_size", (6,))(g)
    assert FeaturePredicate("bond_order_present", (3,))(g)
    assert FeaturePredicate("atom_count_in_range", (7, 7))(g)
    assert FeaturePredicate("scaffold_nonempty", ())(g)
    assert not FeaturePredicate("scaffold_nonempty", ())(parse("CCN"))


def test_bad_specs():
    with pytest.raises(OracleError):
        FeaturePredicate("no_such_kind", ())
    with pytest.raises(OracleError):
        FeaturePredicate("ring_of_size", ())
    with pytest.raises(OracleError):
        OracleSpec((_f("ring_of_size", 6, weight=0.0),))
    with pytest.raises(OracleError):
        OracleSpec((_f("ring_of_size", 6),), mode="medium")
    with pytest.raises(OracleError):
        load_oracle("nope")


def test_oracle_file(tmp_path):
    path = tmp_path / "o.txt"
    path.write_text("# toy\nmode sparse\nring_of_size 6 1\ncontains_element N 1\n", encoding="utf-8")
    spec = load_oracle(f"file:{path}")
    assert spec.mode == "sparse"
    assert evaluate(spec, "C1CCNCC1") == 1.0
    assert evaluate(spec, "C1CCCCC1") == pytest.approx(0.1)
    assert parse_oracle_file(path) == spec
    with pytest.raises(OracleError):
        load_oracle(f"file:{tmp_path / 'missing.txt'}")
    bad = tmp_path / "bad.txt"
    bad.write_text("ring_of_size 6 heavy\n", encoding="utf-8")
    with pytest.raises(OracleError):
        parse_oracle_file(bad)


def test_builtins_exist_and_differ_in_difficulty():
    table = builtin_oracles()
    assert {"dense-easy", "sparse-hard"} <= set(table)
    corpus = generate_corpus(400, seed=4)
    dense = np.array([evaluate(table["dense-easy"], s) for s in corpus])
    sparse = np.array([evaluate(table["sparse-hard"], s) for s in corpus])
    assert (dense >= 0.5).mean() > (sparse >= 0.5).mean()
