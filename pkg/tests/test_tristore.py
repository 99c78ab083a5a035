import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sampledt.seqdt import triangulate_seq
from sampledt.tristore import (INFINITE, NONE, OracleLimitExceeded,
                               Triangulation, canonical_list, canonicalize,
                               facet_key, facet_key_of, from_rows,
                               hull_simplices, link_all,
                               load_triangulation_csv,
                               save_triangulation_csv, validate_delaunay)

import oracles


# -- facet keys -------------------------------------------------------------

def test_facet_key_shared_between_adjacent_triangles():
    # triangles {7,3,1} and {3,7,9} share facet {3,7}
    a = facet_key([1, 3, 7], 0)
    b = facet_key([3, 7, 9], 2)
    assert a == b


def test_facet_key_is_a_set_function():
    assert facet_key_of([1, 2]) == facet_key_of([2, 1])
    assert facet_key_of([5, 1, 9]) == facet_key_of([9, 5, 1])


def test_facet_key_infinite_vertex():
    assert facet_key([4, 2, INFINITE], 1) == facet_key_of([INFINITE, 4])


def test_facet_key_bad_slot():
    with pytest.raises(IndexError):
        facet_key([1, 2, 3], 3)


def test_facet_key_no_collisions_random_pairs():
    # 10^6 random distinct facet pairs; a 64-bit mix should not collide
    rng = np.random.default_rng(0)
    ids = rng.integers(0, 2 ** 40, (2 * 10 ** 6, 2))
    from sampledt.tristore import _facet_keys
    rows = np.concatenate([ids, np.zeros((ids.shape[0], 1), np.int64)], 1)
    keys = _facet_keys(rows)[:, 2]
    a, b = keys[0::2], keys[1::2]
    sa = np.sort(ids[0::2], axis=1)
    sb = np.sort(ids[1::2], axis=1)
    distinct = np.any(sa != sb, axis=1)
    assert distinct.sum() > 999000
    assert not np.any((a == b) & distinct)


@settings(max_examples=200)
@given(st.lists(st.integers(0, 2 ** 62), min_size=3, max_size=3,
                unique=True), st.permutations(range(3)))
def test_facet_key_permutation_invariant(ids, perm):
    assert facet_key_of(ids) == facet_key_of([ids[p] for p in perm])


# -- hull_simplices ---------------------------------------------------------

def test_hull_single_triangle():
    P = np.array([(0., 0), (1, 0), (0, 1)])
    T = triangulate_seq(P)
    assert T.n_finite == 1
    assert len(hull_simplices(T)) == 4


def test_hull_empty():
    T = Triangulation.empty(np.zeros((0, 2)))
    assert hull_simplices(T).size == 0


def test_hull_grid_with_perturbed_point():
    g = np.arange(10.0)
    P = np.array([(x, y) for x in g for y in g])
    P[44] += (0.013, 0.007)
    T = triangulate_seq(P)
    assert not validate_delaunay(T).empty_sphere
    got = set(hull_simplices(T).tolist())
    # oracle: a finite triangle is on the hull iff one of its edges lies on
    # a side of the square
    expect = set()
    for s in T.finite_live:
        r = T.simplices[s]
        for a, b in [(0, 1), (0, 2), (1, 2)]:
            pa, pb = P[r[a]], P[r[b]]
            if any((pa[d] == pb[d] == v) for d in (0, 1) for v in (0, 9)):
                expect.add(int(s))
    infinite = set(np.flatnonzero(T.alive & T.infinite).tolist())
    assert got == expect | infinite
    assert len(infinite) == 36
    assert 18 <= len(expect) <= 36


# -- canonicalize -----------------------------------------------------------

def test_canonicalize_two_triangles():
    P = np.zeros((5, 2))
    rows = np.array([[3, 1, 2], [2, 3, 4]])
    T = Triangulation(P, rows, np.full(rows.shape, NONE))
    assert canonical_list(T) == [(1, 2, 3), (2, 3, 4)]


def test_canonicalize_empty():
    assert canonical_list(Triangulation.empty(np.zeros((0, 3)))) == []


def test_canonicalize_ignores_infinite_and_dead():
    P = np.zeros((4, 2))
    rows = np.array([[0, 1, 2], [1, 2, INFINITE], [1, 2, 3]])
    T = Triangulation(P, rows, np.full(rows.shape, NONE))
    T.kill([2])
    assert canonical_list(T) == [(0, 1, 2)]


@pytest.mark.parametrize("dim", [2, 3])
def test_canonicalize_insertion_order_invariant(dim):
    P = np.random.default_rng(dim).random((400, dim))
    a = canonicalize(triangulate_seq(P, seed=1))
    b = canonicalize(triangulate_seq(P, seed=2))
    c = canonicalize(triangulate_seq(P, shuffle=False))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)


# -- validity oracle --------------------------------------------------------

def test_oracle_accepts_seq_dt_500_2d():
    P = np.random.default_rng(5).random((500, 2))
    rep = validate_delaunay(triangulate_seq(P))
    assert rep.ok and rep.summary() == "ok"


def test_oracle_flags_non_delaunay_diagonal():
    P = np.array([(0., 0), (3, 0), (0, 3), (2.9, 2.9)])
    good = triangulate_seq(P)
    assert validate_delaunay(good).ok
    # the other diagonal of the quadrilateral
    gr = canonical_list(good)
    flipped = [(0, 1, 2), (1, 2, 3)] if gr == [(0, 1, 3), (0, 2, 3)] else \
        [(0, 1, 3), (0, 2, 3)]
    assert gr != flipped
    bad = from_rows(P, flipped)
    rep = validate_delaunay(bad)
    assert rep.n_empty_sphere >= 1
    assert not rep.ok
    assert oracles.brute_delaunay_violations(P, flipped)


def test_oracle_single_triangle():
    P = np.array([(0., 0), (1, 0), (0, 1)])
    assert validate_delaunay(triangulate_seq(P)).ok


def test_oracle_limit():
    P = np.random.default_rng(0).random((50, 2))
    T = triangulate_seq(P)
    with pytest.raises(OracleLimitExceeded):
        validate_delaunay(T, limit=49)


def test_oracle_reports_uncovered_and_asymmetry():
    P = np.random.default_rng(1).random((30, 2))
    T = triangulate_seq(P)
    s = T.finite_live[0]
    victim = T.simplices[s, 0]
    T.neighbors[s, 0] = T.finite_live[1] if T.neighbors[s, 0] != \
        T.finite_live[1] else T.finite_live[2]
    rep = validate_delaunay(T)
    assert rep.neighbor_symmetry
    # remove every simplex touching one vertex
    T2 = triangulate_seq(P)
    T2.kill(np.flatnonzero(np.any(T2.simplices == victim, axis=1)))
    rep2 = validate_delaunay(T2)
    assert victim in rep2.uncovered
    assert not rep2.ok


@pytest.mark.parametrize("dim", [2, 3])
def test_grid_and_brute_oracles_agree(dim):
    rng = np.random.default_rng(dim)
    P = rng.random((300, dim))
    T = triangulate_seq(P)
    # corrupt: replace every simplex by the triangulation of a shifted copy
    Q = P + rng.normal(0, 0.02, P.shape)
    rows = canonicalize(triangulate_seq(Q))
    bad = from_rows(P, rows)
    a = validate_delaunay(bad, method="grid", max_report=10 ** 6)
    b = validate_delaunay(bad, method="brute", max_report=10 ** 6)
    assert a.n_empty_sphere == b.n_empty_sphere > 0
    assert sorted(a.empty_sphere) == sorted(b.empty_sphere)
    assert validate_delaunay(T, method="brute").ok


def test_oracle_small_matches_brute_force_enumeration():
    P = np.random.default_rng(3).random((12, 2))
    ref = oracles.brute_delaunay(P)
    assert canonical_list(triangulate_seq(P)) == ref


# -- structure --------------------------------------------------------------

def test_facet_index_consistency():
    P = np.random.default_rng(2).random((200, 3))
    T = triangulate_seq(P)
    idx = T.facet_index
    for s in np.flatnonzero(T.alive)[:300]:
        for d in range(4):
            assert s in idx.candidates(facet_key(T.simplices[s], d))


def test_compact_renumbers_links():
    P = np.random.default_rng(4).random((60, 2))
    before = canonicalize(triangulate_seq(P))
    # append three tombstoned copies; compaction must drop them and keep
    # the remaining links consistent
    T2 = from_rows(P, before)
    T2.simplices = np.concatenate([T2.simplices, T2.simplices[:3]])
    T2.neighbors = np.concatenate([T2.neighbors,
                                   np.full((3, 3), NONE, np.int64)])
    T2.alive = np.concatenate([T2.alive, np.zeros(3, bool)])
    T2.origin = np.concatenate([T2.origin, np.full(3, -1, np.int32)])
    T2.border = np.concatenate([T2.border, np.zeros(3, bool)])
    T2.compact()
    assert validate_delaunay(T2).ok
    np.testing.assert_array_equal(canonicalize(T2), before)


def test_from_rows_roundtrip_links():
    P = np.random.default_rng(6).random((150, 3))
    T = triangulate_seq(P)
    R = from_rows(P, canonicalize(T))
    assert validate_delaunay(R).ok
    assert R.n_finite == T.n_finite
    assert (R.alive & R.infinite).sum() == (T.alive & T.infinite).sum()


def test_link_all_restores_cleared_links():
    P = np.random.default_rng(7).random((80, 2))
    T = triangulate_seq(P)
    T.neighbors[:] = NONE
    link_all(T)
    assert validate_delaunay(T).ok


# -- export -----------------------------------------------------------------

def test_csv_export_header_and_roundtrip(tmp_path):
    P = np.random.default_rng(8).random((100, 3))
    T = triangulate_seq(P)
    path = tmp_path / "t.csv"
    save_triangulation_csv(T, path)
    first = path.read_text().splitlines()[0]
    assert first == f"# dim=3 n_points=100 n_simplices={T.n_finite}"
    meta, rows = load_triangulation_csv(path)
    assert meta == {"dim": 3, "n_points": 100, "n_simplices": T.n_finite}
    np.testing.assert_array_equal(rows, canonicalize(T))
    assert np.all(np.diff(rows, axis=1) > 0)


def test_csv_export_id_map(tmp_path):
    P = np.array([(0., 0), (1, 0), (0, 1)])
    T = triangulate_seq(P)
    path = tmp_path / "t.csv"
    T.save_csv(path, id_map=np.array([5, 2, 9]), n_points=10)
    meta, rows = load_triangulation_csv(path)
    assert meta["n_points"] == 10
    assert rows.tolist() == [[2, 5, 9]]


def test_csv_import_rejects_mismatch(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("# dim=2 n_points=3 n_simplices=2\n0,1,2\n")
    with pytest.raises(ValueError):
        load_triangulation_csv(path)
    path.write_text("0,1,2\n")
    with pytest.raises(ValueError):
        load_triangulation_csv(path)
