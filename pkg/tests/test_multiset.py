import pytest
from hypothesis import given, strategies as st

from mpmrs.multiset import EMPTY, Multiset, MultisetError, is_submultiset, ms, msum, project

symbols = st.sampled_from(["A", "B", "C", "R0", "R1", "q1'"])
multisets = st.dictionaries(symbols, st.integers(0, 5)).map(Multiset)


def test_sum_examples():
    assert ms("a^3 b") + ms("b c") == ms("a^3 b^2 c")
    assert EMPTY + ms("a^3 b") == ms("a^3 b")
    assert ms("A B") + ms("A E") == ms("A^2 B E")


def test_difference_examples():
    assert ms("a^3 b") - ms("a b") == ms("a^2")
    x = ms("a^2 z")
    assert x - x == EMPTY
    assert ms("A^2 B E^2") - ms("A B") == ms("A E^2")


def test_difference_names_offending_symbol():
    with pytest.raises(MultisetError, match="E"):
        ms("A E") - ms("A E^2")


def test_submultiset_examples():
    assert is_submultiset(ms("a b"), ms("a^2 b c"))
    assert is_submultiset(EMPTY, ms("x y"))
    assert not is_submultiset(ms("A E^2"), ms("A E"))


def test_project_examples():
    assert project(ms("A C F^2"), {"F"}) == ms("F^2")
    m = ms("A B^2")
    assert project(m, m.support()) == m
    assert project(ms("B D^2"), {"F"}) == EMPTY


def test_render_and_parse():
    assert ms("B A^2 A").render() == "A^3 B"
    assert EMPTY.render() == "λ"
    assert Multiset.parse("λ") == EMPTY
    assert Multiset.parse("") == EMPTY
    assert ms("A^2 B E^2").size == 5


@pytest.mark.parametrize("bad", ["A^x", "A^-1", "a->b", "@x"])
def test_parse_rejects(bad):
    with pytest.raises(MultisetError):
        Multiset.parse(bad)


def test_zero_counts_not_stored():
    m = Multiset({"A": 0, "B": 2})
    assert "A" not in m
    assert m["A"] == 0
    assert m.support() == {"B"}


def test_negative_counts_rejected():
    with pytest.raises(MultisetError):
        Multiset({"A": -1})


def test_hash_and_eq():
    assert hash(ms("A B")) == hash(ms("B A"))
    assert {ms("A B"): 1}[ms("B A")] == 1


def test_times_and_max_copies():
    assert ms("A B").times(3) == ms("A^3 B^3")
    assert ms("A^7 B^2").max_copies(ms("A^2 B")) == 2
    assert msum([ms("A"), ms("A B")]) == ms("A^2 B")


@given(multisets, multisets)
def test_add_then_subtract(x, y):
    assert (x + y) - y == x


@given(multisets, multisets)
def test_summand_included(x, y):
    assert x <= x + y


@given(multisets, multisets, multisets)
def test_inclusion_is_partial_order(x, y, z):
    assert x <= x
    if x <= y and y <= x:
        assert x == y
    if x <= y and y <= z:
        assert x <= z


@given(multisets, multisets, st.sets(symbols))
def test_projection_distributes(x, y, keep):
    assert project(x + y, keep) == project(x, keep) + project(y, keep)


@given(multisets)
def test_render_round_trip(x):
    assert Multiset.parse(x.render()) == x
    assert Multiset.parse(x.render()).render() == x.render()


@given(multisets, multisets)
def test_sum_commutes(x, y):
    assert x + y == y + x
