import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiplierlab.groups import (
    FiniteGroup,
    FreeGroup,
    GroupError,
    LatticeGroup,
    builtin_group,
    build_finite_group,
    element_set,
    folner_defect,
    folner_set,
    lambda_matrix,
    read_cayley_csv,
    small_group_specs,
    word_ball,
    write_cayley_csv,
)


def test_trivial_group():
    G = build_finite_group([[0]])
    assert G.order == 1 and G.identity == 0 and G.inv(0) == 0


def test_z2_table():
    G = build_finite_group([[0, 1], [1, 0]])
    assert G.order == 2 and G.inverse[1] == 1


def test_transposed_entry_names_row():
    G = builtin_group("sym:3")
    i, j = next((g, h) for g in range(6) for h in range(g + 1, 6) if G.mul(g, h) != G.mul(h, g))
    bad = G.cayley.copy()
    bad[i, j] = G.cayley[j, i]
    with pytest.raises(GroupError, match=f"row {i} "):
        build_finite_group(bad)


def test_swapped_pair_breaks_latin_or_associativity():
    table = builtin_group("sym:3").cayley.copy()
    table[2, 3], table[2, 4] = table[2, 4], table[2, 3]
    with pytest.raises(GroupError):
        build_finite_group(table)


def test_non_associative_table_names_triple():
    # a Latin square with identity 0 that is not a group (order-5 loop)
    loop = [
        [0, 1, 2, 3, 4],
        [1, 0, 3, 4, 2],
        [2, 4, 0, 1, 3],
        [3, 2, 4, 0, 1],
        [4, 3, 1, 2, 0],
    ]
    with pytest.raises(GroupError, match="triple"):
        build_finite_group(loop)


def test_missing_identity():
    with pytest.raises(GroupError, match="identity"):
        # a*b = -a-b mod 3 is a Latin square without identity
        build_finite_group([[0, 2, 1], [2, 1, 0], [1, 0, 2]])


def test_bad_entries():
    with pytest.raises(GroupError, match="outside"):
        build_finite_group([[0, 2], [1, 0]])
    with pytest.raises(GroupError, match="square"):
        build_finite_group([[0, 1]])


def test_builtin_zmod4():
    G = builtin_group("zmod:4")
    assert G.cayley[1][3] == 0


def test_builtin_free_cancellation():
    F2 = builtin_group("free:2")
    a = F2.parse("a")
    assert F2.mul(a, F2.inv(a)) == F2.identity == ()
    assert F2.parse("aA") == ()
    assert F2.format(F2.parse("aB")) == "aB"


def test_sym3_nonabelian():
    G = builtin_group("sym:3")
    assert G.order == 6
    assert any(G.mul(g, h) != G.mul(h, g) for g in range(6) for h in range(6))


def test_builtin_errors():
    with pytest.raises(GroupError, match="unknown"):
        builtin_group("lamplighter:2")
    with pytest.raises(GroupError):
        builtin_group("zmod:1000")
    with pytest.raises(GroupError):
        builtin_group("free:2*zmod:2")


@pytest.mark.parametrize("spec", small_group_specs())
def test_catalog_groups_valid(spec):
    G = builtin_group(spec)
    assert G.order <= 24
    e = G.identity
    for g in range(G.order):
        assert G.mul(g, G.inv(g)) == e == G.mul(G.inv(g), g)


def test_catalog_covers_every_order():
    orders = {builtin_group(s).order for s in small_group_specs()}
    assert orders == set(range(1, 25))


def test_folner_set_examples():
    Z = builtin_group("zd:1")
    assert [g[0] for g in folner_set(Z, 5)] == [0, 1, 2, 3, 4]
    F2 = builtin_group("free:2")
    ball = folner_set(F2, 1)
    assert len(ball) == 5 and ball.elements[0] == ()
    G = builtin_group("zmod:6")
    assert list(folner_set(G, 0)) == list(range(6)) == list(folner_set(G, 17))


@pytest.mark.parametrize("r", range(5))
def test_free_ball_sizes(r):
    assert len(word_ball(FreeGroup(2), r)) == 2 * 3**r - 1


def test_set_cap():
    with pytest.raises(GroupError, match="cap"):
        folner_set(FreeGroup(2), 8)
    with pytest.raises(GroupError):
        element_set(LatticeGroup(1), [(0,), (0,)])


@pytest.mark.parametrize("N", [1, 2, 5, 64])
def test_interval_defect(N):
    F = folner_set(LatticeGroup(1), N)
    assert folner_defect(F, (1,)) == pytest.approx((N - 1) / N, abs=0)
    assert folner_defect(F, (0,)) == 1.0


def test_free_ball_defect_by_explicit_intersection():
    F2 = FreeGroup(2)
    F = folner_set(F2, 2)
    a = (1,)
    shifted = {F2.reduce(a + w) for w in F.elements}
    expected = len(shifted & set(F.elements)) / len(F)
    assert folner_defect(F, a) == expected
    # a*w stays in the ball for w = e, the four letters, and Ab, AB, AA
    assert expected == 8 / 17


def test_box_defect_grows_toward_one():
    Z2 = LatticeGroup(2)
    for g in Z2.generators():
        values = [1 - folner_defect(folner_set(Z2, r), g) for r in (2, 4, 8, 16)]
        assert all(b <= a for a, b in zip(values, values[1:]))


def test_lambda_matrix_examples():
    G = builtin_group("zmod:3")
    W = folner_set(G, 0)
    assert np.array_equal(lambda_matrix(0, W), np.eye(3))
    M = lambda_matrix(1, W)
    assert np.allclose(M.T @ M, np.eye(3))
    Z = LatticeGroup(1)
    F = element_set(Z, [(0,), (1,), (2,)])
    M = lambda_matrix((1,), F)
    assert {tuple(ij) for ij in np.argwhere(M == 1)} == {(1, 0), (2, 1)}


@pytest.mark.parametrize("spec", ["zmod:5", "sym:3", "dicyclic:2", "alt:4"])
def test_lambda_is_a_homomorphism(spec):
    G = builtin_group(spec)
    W = folner_set(G, 0)
    mats = [lambda_matrix(g, W) for g in range(G.order)]
    for g, h in itertools.product(range(G.order), repeat=2):
        assert np.array_equal(mats[g] @ mats[h], mats[G.mul(g, h)])
    for M in mats:
        assert np.array_equal(M @ M.T, np.eye(G.order))


def test_lambda_partial_isometry_on_subsets():
    G = builtin_group("sym:4")
    F = element_set(G, [0, 3, 5, 11, 17])
    for g in range(G.order):
        M = lambda_matrix(g, F)
        assert set(np.unique(M)) <= {0.0, 1.0}
        assert M.sum(axis=0).max() <= 1 and M.sum(axis=1).max() <= 1
        assert np.allclose(M @ M.T @ M, M)


def test_csv_roundtrip(tmp_path):
    G = builtin_group("dihedral:4")
    path = tmp_path / "d4.csv"
    write_cayley_csv(G, path)
    H = read_cayley_csv(path)
    assert np.array_equal(G.cayley, H.cayley)
    K = builtin_group(f"csv:{path}")
    assert K.order == 8


def test_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,1\n1,x\n")
    with pytest.raises(GroupError, match=":2:"):
        read_cayley_csv(path)
    path.write_text("0,1\n1\n")
    with pytest.raises(GroupError, match=":2:"):
        read_cayley_csv(path)


def test_finite_parse_errors():
    G = builtin_group("zmod:3")
    assert G.parse("2") == 2
    with pytest.raises(GroupError):
        G.parse("x")
    with pytest.raises(GroupError):
        G.parse(3)


def test_direct_product_structure():
    G = builtin_group("zmod:2*zmod:3")
    assert G.order == 6 and G.is_abelian()
    assert isinstance(G, FiniteGroup)


letters = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=12)


@given(letters, letters)
def test_free_words_stay_reduced(u, v):
    F2 = FreeGroup(2)
    g, h = F2.reduce(u), F2.reduce(v)
    gh = F2.mul(g, h)
    assert F2.contains(gh)
    assert gh == F2.reduce(list(g) + list(h))
    assert F2.mul(gh, F2.inv(gh)) == ()


@given(letters, letters, letters)
@settings(max_examples=50)
def test_free_associativity(u, v, w):
    F2 = FreeGroup(2)
    a, b, c = (F2.reduce(x) for x in (u, v, w))
    assert F2.mul(F2.mul(a, b), c) == F2.mul(a, F2.mul(b, c))


@given(st.lists(st.integers(-5, 5), min_size=2, max_size=2))
def test_lattice_inverse(v):
    Z2 = LatticeGroup(2)
    g = tuple(v)
    assert Z2.mul(g, Z2.inv(g)) == Z2.identity
    assert Z2.parse(Z2.format(g)) == g
