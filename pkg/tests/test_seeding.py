import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lmmbench.seeding import SeedError, as_generator, resolve_seed_tree, stream


@given(st.integers(0, 2**64 - 1), st.text(min_size=1, max_size=30))
def test_same_label_same_stream(seed, label):
    assert np.array_equal(stream(seed, label).random(8), stream(seed, label).random(8))


def test_order_independent():
    a = resolve_seed_tree(3, ["x", "y", "z"])
    b = resolve_seed_tree(3, ["z", "x", "y"])
    for label in "xyz":
        assert np.array_equal(a[label].random(5), b[label].random(5))


def test_siblings_uncorrelated():
    tree = resolve_seed_tree(12, [f"trial={i}" for i in range(6)])
    draws = np.array([g.standard_normal(10_000) for g in tree.values()])
    r = np.corrcoef(draws)
    assert np.max(np.abs(r[~np.eye(6, dtype=bool)])) < 0.05


def test_duplicate_label():
    with pytest.raises(SeedError):
        resolve_seed_tree(0, ["a", "b", "a"])


def test_master_seed_matters():
    assert not np.array_equal(stream(1, "a").random(4), stream(2, "a").random(4))


def test_as_generator_passthrough():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert isinstance(as_generator(5), np.random.Generator)
