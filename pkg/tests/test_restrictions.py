import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signsvar import (
    IrfTensor,
    Match,
    Restriction,
    RestrictionError,
    RestrictionSet,
    build_candidate_table,
    check_assumptions,
    check_cross_shock,
    check_dynamic,
    column_satisfies,
    parse_restrictions,
    serialize_restrictions,
)
from signsvar.restrictions import inequality_count

from conftest import fixture_set

R1 = np.array([[0.2, 0.1, -0.3, 0.8], [0.3, 0.2, -0.4, 0.7], [0.1, -1.1, 1.2, -0.4], [1.2, 0.5, 0.5, -1.2]])
R2 = R1.copy()
R2[0, 1] = -0.1
R3 = np.array([[0.2, -0.1, 0.3, 0.8], [0.3, 0.2, -0.4, 0.7], [0.1, -1.1, 1.2, -0.4], [1.2, 0.5, 0.5, -1.2]])


# --- candidate tables ------------------------------------------------------


def test_table_first_draw():
    T = build_candidate_table(fixture_set("two_shock_signs.csv"), R1)
    assert T.entries.tolist() == [[1, 1, -1, 1], [0, 0, 0, 0]]


def test_table_second_draw():
    T = build_candidate_table(fixture_set("two_shock_signs.csv"), R2)
    assert T.entries.tolist() == [[1, 0, -1, 1], [0, -1, 0, 0]]
    assert T.strict


def test_table_non_separable():
    T = build_candidate_table(fixture_set("two_shock_identical_signs.csv", strict=False), R3)
    assert T.entries.tolist() == [[1, 0, 0, 1], [1, 0, 0, 1]]
    assert not T.strict


def test_column_satisfies_cases():
    rset = fixture_set("two_shock_signs.csv")
    assert column_satisfies(rset, 0, [0.2, 0.3, 0.1, 1.2]) is Match.PLUS
    assert column_satisfies(rset, 0, [-0.3, -0.4, 1.2, 0.5]) is Match.MINUS
    for j in range(2):
        assert column_satisfies(rset, j, np.zeros(4)) is Match.BOTH


def test_strict_collapses_both():
    rset = fixture_set("two_shock_signs.csv")
    R = R2.copy()
    R[:, 2] = 0.0
    assert build_candidate_table(rset, R).entries[0, 2] == 2
    T = build_candidate_table(rset, R, strict=True)
    assert T.entries[0, 2] == 1


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_antisymmetry_and_column_uniqueness(seed):
    rng = np.random.default_rng(seed)
    rset = fixture_set("fifteen_variable.csv")
    c = rng.normal(size=rset.n)
    for j in range(rset.m):
        a, b = column_satisfies(rset, j, c), column_satisfies(rset, j, -c)
        assert (a is Match.PLUS) == (b is Match.MINUS)
    T = build_candidate_table(rset, rng.normal(size=(rset.n, rset.n)))
    assert ((T.entries != 0).sum(axis=0) <= 1).all()


def test_inequality_count_bound():
    rset = fixture_set("fifteen_variable.csv")
    assert inequality_count(rset) == sum(len(g) for g in rset.impact_single) * rset.n
    assert inequality_count(rset) <= rset.m * rset.n ** 2


# --- assumptions -----------------------------------------------------------


def test_pair_one_two_not_separable():
    report = check_assumptions(fixture_set("three_shock_unseparated.csv"))
    assert not report.holds
    assert not report.pair(0, 1).distinguishable
    assert report.pair(0, 2).distinguishable and report.pair(1, 2).distinguishable


def test_three_shocks_separable():
    report = check_assumptions(fixture_set("three_shock_signs.csv"))
    assert report.holds
    w = report.pair(0, 1)
    assert (w.condition, w.i1, w.i2) == (1, 0, 1)


def test_identical_signs_not_separable():
    assert not check_assumptions(fixture_set("two_shock_identical_signs.csv", strict=False)).holds


def test_ranking_witnesses():
    report = check_assumptions(fixture_set("three_shock_rankings.csv"))
    assert report.holds
    assert (report.pair(0, 1).condition, report.pair(0, 1).i1, report.pair(0, 1).i2) == (1, 0, 1)
    assert (report.pair(0, 2).condition, report.pair(0, 2).i1, report.pair(0, 2).i2) == (1, 0, 2)
    assert (report.pair(1, 2).condition, report.pair(1, 2).i1, report.pair(1, 2).i2) == (2, 0, 2)


def test_fifteen_variable_witnesses():
    rset = fixture_set("fifteen_variable.csv")
    report = check_assumptions(rset)
    assert report.holds
    names = rset.shock_names
    by_name = {(names[p.j], names[p.l]): p for p in report.pairs}
    for a, b in [("supply", "demand"), ("supply", "monetary"), ("demand", "monetary"), ("monetary", "financial")]:
        assert by_name[(a, b)].condition == 1
    assert by_name[("demand", "investment")].condition == 2
    assert by_name[("demand", "financial")].condition == 2


# --- parsing ---------------------------------------------------------------


def test_parse_fifteen_variable_fixture():
    rset = fixture_set("fifteen_variable.csv")
    assert (rset.n, rset.m) == (15, 5)
    assert all(rset.impact_single)
    rankings = [r for g in rset.impact_single for r in g if not r.is_sign]
    assert len(rankings) == 3
    assert {(rset.variable_label(r.i), rset.variable_label(r.k)) for r in rankings} == {("investment", "gdp")}
    assert sum(1 for r in rset.records if r.is_sign) == 39


def test_parse_three_by_three_signs():
    rset = fixture_set("three_shock_signs.csv")
    assert (rset.n, rset.m, len(rset.records)) == (3, 3, 8)


def test_empty_file():
    with pytest.raises(RestrictionError, match="no restrictions"):
        parse_restrictions("")
    with pytest.raises(RestrictionError, match="no restrictions"):
        parse_restrictions("kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n")


@pytest.mark.parametrize("body, line, column", [
    ("sign,1,1,,,2,,", 3, "sign"),
    ("sign,x,1,,,1,,", 3, "var_i"),
    ("sign,9,1,,,1,,", 3, "var_i"),
    ("rank,1,1,,,1,,", 3, "kind"),
    ("ranking,1,1,2,,1,,", 3, "lambda"),
    ("ranking,1,1,2,,1,-1,", 3, "lambda"),
    ("ranking,1,1,2,,1,1/2,", 3, "lambda"),
])
def test_malformed_records(body, line, column):
    text = "#n: 3\nkind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n" + body + "\n"
    with pytest.raises(RestrictionError) as err:
        parse_restrictions(text)
    assert err.value.line == line and err.value.column == column


def test_unknown_label():
    text = "#variables: a,b\n#shocks: s\nkind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\nsign,c,s,,,1,,\n"
    with pytest.raises(RestrictionError, match="c"):
        parse_restrictions(text)


def test_strict_mode_needs_every_shock():
    text = "#n: 2\n#m: 2\nkind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\nsign,1,1,,,1,,\n"
    with pytest.raises(RestrictionError, match="no impact restriction"):
        parse_restrictions(text)
    assert parse_restrictions(text, strict=False).m == 2


def test_partitions_are_disjoint_and_complete():
    text = "\n".join([
        "#n: 3", "#m: 2",
        "kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon",
        "sign,1,1,,,1,,", "sign,2,2,,,-1,,",
        "ranking,1,1,1,2,1,2,0",
        "ranking,1,2,3,2,1,0.5,",
        "sign,1,1,,,1,,3",
        "ranking,1,2,1,1,1,0,",
    ])
    rset = parse_restrictions(text)
    single = [r for g in rset.impact_single for r in g]
    parts = single + list(rset.cross_shock) + list(rset.dynamic)
    assert sorted(map(repr, parts)) == sorted(map(repr, rset.records))
    assert len(rset.cross_shock) == 1 and len(rset.dynamic) == 1
    # a lambda=0 record is a pure sign restriction on (i, j) whatever (k, l) say
    assert any(r.is_sign and r.j == 1 and r.i == 0 for r in rset.impact_single[1])


def _record(ranking, i, j, sign, k, l, lam, horizon):
    if ranking:
        return Restriction("ranking", i, j, sign, k, l, lam, horizon)
    return Restriction("sign", i, j, sign, horizon=horizon)


records = st.builds(
    _record, st.booleans(), st.integers(0, 3), st.integers(0, 1), st.sampled_from([-1, 1]),
    st.integers(0, 3), st.integers(0, 1), st.sampled_from([0.0, 0.25, 1.0, 1.5, 0.1]), st.integers(0, 3),
)


@given(st.lists(records, min_size=1, max_size=8))
@settings(max_examples=100, deadline=None)
def test_serialize_round_trip(recs):
    rset = RestrictionSet(4, 2, tuple(recs), ("a", "b", "c", "d"), ("x", "y"))
    assert parse_restrictions(serialize_restrictions(rset), strict=False) == rset


# --- post-hoc filters ------------------------------------------------------


def _cross_set():
    text = "#n: 2\n#m: 2\nkind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n" \
           "sign,1,1,,,1,,\nsign,2,2,,,1,,\nranking,1,1,1,2,1,1,0\n"
    return parse_restrictions(text)


def test_cross_shock_cases():
    assert check_cross_shock(fixture_set("two_shock_signs.csv"), np.eye(4))
    rset = _cross_set()
    assert check_cross_shock(rset, np.array([[0.5, 0.2], [0.0, 1.0]]))
    assert not check_cross_shock(rset, np.array([[0.1, 0.2], [0.0, 1.0]]))


def test_dynamic_cases():
    assert check_dynamic(fixture_set("two_shock_signs.csv"), IrfTensor(np.zeros((4, 2, 3))))
    text = "#n: 2\n#m: 1\nkind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\nsign,1,1,,,1,,0\nsign,2,1,,,1,,1\n"
    assert check_dynamic(parse_restrictions(text), IrfTensor(np.array([[[1.0, 0.0]], [[1.0, 0.0]]])))


def test_dynamic_violation_detected():
    rset = fixture_set("monetary_dynamic.csv")
    names = list(rset.variable_names)
    values = np.zeros((6, 1, 7))
    values[names.index("cpi")] = -0.1
    values[names.index("commodity_index")] = -0.2
    values[names.index("nonborrowed_reserves")] = -0.3
    values[names.index("fed_funds")] = 0.4
    assert check_dynamic(rset, IrfTensor(values))
    values[names.index("cpi"), 0, 3] = 0.05
    assert not check_dynamic(rset, IrfTensor(values))
    with pytest.raises(ValueError):
        check_dynamic(rset, IrfTensor(values[:, :, :4]))
