import csv
import io

import numpy as np
import pytest

from signsvar import RestrictionSet
from signsvar.harness import (
    BenchCell,
    BenchConfig,
    ConfigError,
    equivalence_study,
    generate_scheme,
    load_bench_config,
    run_bench,
    summarize_irfs,
)
from signsvar.restrictions import Restriction

from conftest import DATA


def test_scheme_counts_split_exactly(rng):
    b0 = rng.normal(size=(6, 6))
    rset = generate_scheme(b0, 3, 7)
    assert [len(g) for g in rset.impact_single] == [3, 2, 2]
    for r in rset.records:
        assert r.sign == (1 if b0[r.i, r.j] >= 0 else -1)
    assert [len(g) for g in generate_scheme(b0, 2, 10).impact_single] == [5, 5]


def test_scheme_extras(rng):
    from signsvar.var import VarParams

    b0 = rng.normal(size=(5, 5))
    params = VarParams(np.zeros(5), 0.3 * np.eye(5)[None], b0 @ b0.T)
    rset = generate_scheme(b0, 2, 6, ranking=2, dynamic=2, params=params)
    assert len(rset.dynamic) == 2 and len(rset.records) == 10
    with pytest.raises(ValueError):
        generate_scheme(b0, 2, 6, dynamic=1)


def small_config(**kw):
    base = dict(cells=(BenchCell(6, 2, 6),), candidates=4000, seed=3, p=2, T_obs=100)
    base.update(kw)
    return BenchConfig(**base)


def test_bench_deterministic():
    a, b = run_bench(small_config()), run_bench(small_config())
    assert a.cells[0].stats == b.cells[0].stats
    assert a.to_csv() == b.to_csv()


def test_single_sign_always_repairable():
    res = run_bench(small_config(cells=(BenchCell(4, 1, 1),)))
    assert res.cells[0].stats["proposed"].acceptance_rate == 1.0


def test_bench_outputs():
    res = run_bench(small_config(cells=(BenchCell(6, 2, 6), BenchCell(5, 2, 6))))
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert rows[0] == ["n", "m", "restrictions", "proposed_candidates", "proposed_admissible",
                       "rwz_candidates", "rwz_admissible"]
    assert len(rows) == 3 and rows[1][:3] == ["6", "2", "6"]
    js = res.to_json()
    cell = js["cells"]["n=6,m=2,r=6"]
    for alg in ("proposed", "rwz"):
        s = cell[alg]
        assert s["candidates"] == 4000
        assert s["acceptance_probability"] == s["admissible"] / s["candidates"]
        assert s["candidates"] == s["admissible"] + s["rejected_impact"] + s["rejected_cross"] + s["rejected_dynamic"]


def test_infeasible_cell_reported():
    # one sign per shock on the same variable can never separate two shocks
    res = run_bench(small_config(cells=(BenchCell(4, 2, 2), BenchCell(6, 2, 6)), max_scheme_attempts=5))
    assert res.cells[0].error and not res.cells[0].stats
    assert res.cells[1].error is None and res.cells[1].stats


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        small_config(algorithms=())
    with pytest.raises(ConfigError):
        small_config(candidates=0)
    with pytest.raises(ConfigError):
        small_config(algorithms=("bogus",))
    cfg = load_bench_config(DATA / "bench_desk.json")
    assert [(c.n, c.m) for c in cfg.cells] == [(10, 5), (10, 8), (30, 5), (30, 8)]
    assert cfg.algorithms == ("proposed", "rwz")
    path = tmp_path / "c.json"
    path.write_text('{"cells": [{"n": 4, "m": 2, "restrictions": 4}], "algorithms": []}')
    with pytest.raises(ConfigError):
        load_bench_config(path)


def test_monte_carlo_standard_error(rng):
    values = rng.normal(size=(400, 3, 2, 4))
    s = summarize_irfs(values)
    assert np.allclose(s.mean_se, values.std(axis=0, ddof=1) / np.sqrt(400), rtol=1e-14)
    assert (np.diff(s.quantiles, axis=0) >= 0).all()


def _scheme():
    return RestrictionSet.from_sign_matrix([[1, 1], [1, -1], [0, 0], [0, 0]])


def test_equivalence_symmetric():
    a = equivalence_study(4, 2, _scheme(), 400, seed=7, H=3, bootstrap_reps=20)
    b = equivalence_study(4, 2, _scheme(), 400, seed=7, H=3, algorithms=("rwz", "proposed"), bootstrap_reps=20)
    assert a.draws == b.draws
    assert np.array_equal(a.ks_pvalues, b.ks_pvalues)
    assert a.max_gap == b.max_gap and a.se_at_max_gap == b.se_at_max_gap
    for alg in ("proposed", "rwz"):
        assert np.array_equal(a.quantiles[alg], b.quantiles[alg])


def test_equivalence_rejects_unrestricted_shock():
    rset = RestrictionSet(4, 2, (Restriction("sign", 0, 0, 1),))
    with pytest.raises(ConfigError):
        equivalence_study(4, 2, rset, 10, seed=1)


def test_equivalence_partial_flag():
    rng = np.random.default_rng(0)
    b0 = rng.normal(size=(8, 8))
    scheme = generate_scheme(b0, 4, 32)
    rep = equivalence_study(8, 4, scheme, 5, seed=2, cap=20, bootstrap_reps=5)
    assert rep.partial and rep.draws["rwz"] < 5 and not rep.passed
