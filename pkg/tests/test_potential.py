import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import EXAMPLE1, EXAMPLE2, EXAMPLE3
from multiergodic.potential import (
    Potential,
    PotentialError,
    ShiftParams,
    all_words,
    cell_generators_by_length,
    cell_length_counts,
    column_length,
    count_cells_of_length,
    index_decompose,
    index_word,
    load_potential,
    multiple_ergodic_sum,
    partition_cells,
    phi_eval,
    word_index,
)


def test_load_example_documents(tmp_path):
    p1 = load_potential({"m": 2, "q": 2, "ell": 2, "phi": EXAMPLE1})
    assert (p1.alpha_min, p1.alpha_max) == (0, 1)
    p2 = load_potential(json.dumps({"m": 2, "q": 2, "ell": 2, "phi": EXAMPLE2}))
    assert (p2.alpha_min, p2.alpha_max) == (-1, 1)
    f = tmp_path / "p.json"
    f.write_text(json.dumps(p2.to_dict()))
    assert np.array_equal(load_potential(f).values, p2.values)
    assert np.array_equal(load_potential(str(f)).values, p2.values)


@pytest.mark.parametrize(
    "doc, msg",
    [
        ({"m": 2, "q": 2, "ell": 2, "phi": [0, 0, 0]}, "expected 4"),
        ({"m": 2, "q": 2, "ell": 2, "phi": [0, 0, 0, float("nan")]}, "finite"),
        ({"m": 1, "q": 2, "ell": 2, "phi": [0]}, "m"),
        ({"m": 2, "q": 1, "ell": 2, "phi": [0] * 4}, "q"),
        ({"m": 2, "q": 2, "phi": [0] * 4}, "missing"),
        ({"m": 2, "q": 2, "ell": 2, "phi": ["a", 0, 0, 0]}, "numeric"),
    ],
)
def test_load_rejects(doc, msg):
    with pytest.raises(PotentialError, match=msg):
        load_potential(doc)


def test_params_reject_huge():
    with pytest.raises(PotentialError):
        ShiftParams(2, 2, 40)


def test_values_read_only(ex1):
    with pytest.raises(ValueError):
        ex1.values[0] = 5


def test_phi_eval():
    p1 = Potential.from_values(2, 2, 2, EXAMPLE1)
    assert phi_eval(p1, (1, 1)) == 1
    # the literal array [0, -1, 1, 0]: lookup at index 1*2 + 0
    lit = Potential.from_values(2, 2, 2, [0, -1, 1, 0])
    assert phi_eval(lit, (1, 0)) == 1
    c = Potential.from_values(3, 2, 3, [2.5] * 27)
    assert all(phi_eval(c, w) == 2.5 for w in all_words(3, 3))
    with pytest.raises(ValueError):
        phi_eval(p1, (1,))
    with pytest.raises(ValueError):
        phi_eval(p1, (1, 2))


def test_lexicographic_index():
    assert word_index((1, 0, 2), 3) == 1 * 9 + 0 + 2
    assert index_word(11, 3, 3) == (1, 0, 2)
    words = all_words(2, 3)
    assert [word_index(w, 2) for w in words] == list(range(8))


@pytest.mark.parametrize("k,q,expected", [(12, 2, (3, 2)), (7, 2, (7, 0)), (27, 3, (1, 3))])
def test_index_decompose_examples(k, q, expected):
    assert index_decompose(k, q) == expected


@given(st.integers(1, 10**9), st.integers(2, 7))
def test_index_decompose_roundtrip(k, q):
    i, j = index_decompose(k, q)
    assert i * q**j == k and i % q != 0


def _cells(n, q):
    return sorted(tuple(c.positions) for c in partition_cells(n, q))


def test_partition_examples():
    assert _cells(6, 2) == [(1, 2, 4), (3, 6), (5,)]
    assert _cells(1, 2) == [(1,)]
    assert _cells(9, 3) == [(1, 3, 9), (2, 6), (4,), (5,), (7,), (8,)]


@pytest.mark.parametrize("q", [2, 3, 5])
def test_partition_cells_cover_and_cardinality(q):
    for n in range(1, 401):
        cells = partition_cells(n, q)
        flat = sorted(p for c in cells for p in c.positions)
        assert flat == list(range(1, n + 1))
        for c in cells:
            assert c.i % q != 0
            assert len(c) == int(math.floor(math.log(n / c.i) / math.log(q) + 1e-12)) + 1


def test_column_length_at_breakpoints():
    # column_length(i, ., q) only changes at n = i q^j
    for q in (2, 3, 5):
        for i in range(1, 400):
            if i % q == 0:
                continue
            j = 0
            while i * q**j <= 10**5:
                b = i * q**j
                assert column_length(i, b, q) == j + 1
                assert column_length(i, b - 1, q) == j
                j += 1


def test_count_examples():
    assert count_cells_of_length(6, 2, 1) == 1
    assert count_cells_of_length(6, 2, 2) == 1
    n = 10**5
    brute = sum(1 for i in range(1, n + 1) if i % 2 and column_length(i, n, 2) == 3)
    assert count_cells_of_length(n, 2, 3) == brute
    assert abs(brute - n / 16) <= 4


@given(st.integers(1, 10**5), st.sampled_from([2, 3, 5]))
def test_counts_sum_to_n_and_bound(n, q):
    counts = cell_length_counts(n, q)
    assert sum(k * c for k, c in counts.items()) == n
    for k in range(1, int(math.log(n, q)) + 2):
        N = count_cells_of_length(n, q, k)
        assert abs(N / n - (q - 1) ** 2 / q ** (k + 1)) <= 4 / n


@given(st.integers(1, 3000), st.sampled_from([2, 3, 5]))
def test_generators_by_length_matches_cells(n, q):
    by_len = cell_generators_by_length(n, q)
    ref = {}
    for c in partition_cells(n, q):
        ref.setdefault(len(c), []).append(c.i)
    assert {k: v.tolist() for k, v in by_len.items()} == ref


def test_ergodic_sum_examples():
    p1 = Potential.from_values(2, 2, 2, EXAMPLE1)
    assert multiple_ergodic_sum(p1, np.ones(10, int), 5) == (5.0, 1.0)
    assert multiple_ergodic_sum(p1, np.zeros(10, int), 5) == (0.0, 0.0)
    p3 = Potential.from_values(2, 2, 2, EXAMPLE3)
    x = np.arange(8) % 2  # x_1 = 0, x_2 = 1, ...
    # terms phi(x_k, x_2k), k = 1..4: phi(0,1), phi(1,1), phi(0,1), phi(1,1)
    assert multiple_ergodic_sum(p3, x, 4) == (2.0, 0.5)
    with pytest.raises(ValueError):
        multiple_ergodic_sum(p1, np.zeros(9, int), 5)


def test_ergodic_sum_ell3_uses_geometric_positions():
    rng = np.random.default_rng(1)
    p = Potential.from_values(2, 3, 3, rng.normal(size=8))
    x = rng.integers(0, 2, 9 * 7)
    direct = sum(p.values[word_index((x[k - 1], x[3 * k - 1], x[9 * k - 1]), 2)] for k in range(1, 8))
    assert multiple_ergodic_sum(p, x, 7)[0] == pytest.approx(direct, abs=1e-14)


def test_shifted_and_table(ex2):
    assert np.array_equal(ex2.shifted(1.0).values, ex2.values - 1)
    assert ex2.table().shape == (2, 2)
    assert ex2.table()[0, 1] == -1
