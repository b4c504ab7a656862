from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from strategies import unit_vectors
from telecert.geometry import SIGNS, TETRAHEDRON, sample_uniform_sphere
from telecert.protocols import Gisin, GisinHashed, Ideal, LowFidelity, PCrit, TonerBaconActive
from telecert.stats import (
    AXIS_SETTINGS,
    LINEARITY_SETTINGS,
    ActiveCompensationError,
    CsvFormatError,
    ExperimentTable,
    MissingSettingError,
    check_alice_marginal,
    check_linearity,
    check_no_signaling,
    empirical_distribution,
    export_csv,
    fit_conditional_vectors,
    ingest_csv,
    require_separated,
)

X, Y, Z = np.eye(3)
T00 = TETRAHEDRON[0, 0]


def _table(rows):
    rows = np.array(rows, dtype=float)
    return ExperimentTable(rows[:, :3], rows[:, 3:6], rows[:, 6], rows[:, 7], rows[:, 8])


# empirical distributions ------------------------------------------------------


def test_point_mass():
    t = _table([[0, 0, 1, 1, 0, 0, 0, 0, 1]] * 4)
    d = empirical_distribution(t, Z, X)
    assert d(0, 0, 1) == 1.0


def test_missing_setting():
    t = _table([[0, 0, 1, 1, 0, 0, 0, 0, 1]])
    with pytest.raises(MissingSettingError):
        empirical_distribution(t, X, X)


def test_ideal_sampled_frequency():
    t = ExperimentTable.simulate(Ideal(1.0), [(Z, Z)], 1_000_000, np.random.default_rng(1))
    assert abs(empirical_distribution(t, Z, Z)(0, 0, 1) - 0.25) < 0.003


def test_gisin_support():
    t = ExperimentTable.simulate(Gisin(), [(T00, Z)], 1_000_000, np.random.default_rng(2))
    d = empirical_distribution(t, T00, Z)
    assert d.alice_marginal()[0, 0] == 1.0


def test_grouping_rounds_coordinates():
    a = np.array([[1.0, 0.0, 0.0], [1.0, 1e-14, 0.0]])
    t = ExperimentTable(a, [Z, Z], [0, 0], [0, 0], [1, -1])
    assert len(t.settings()) == 1
    assert empirical_distribution(t, X, Z)(0, 0, 1) == 0.5


# conditional vectors ------------------------------------------------------------


@given(unit_vectors())
def test_fit_ideal_exact(a):
    est = fit_conditional_vectors(Ideal(1.0), a)
    for (c0, c1), v in est.vectors.items():
        assert np.allclose(v.V, SIGNS[c0, c1] * a, atol=1e-12)
        assert np.allclose(v.A, a, atol=1e-12)
        assert v.residual < 1e-10
        assert np.array_equal(v.A, SIGNS[c0, c1] * v.V)


def test_fit_ideal_shrunk():
    a = np.array([0.48, -0.6, 0.64])
    est = fit_conditional_vectors(Ideal(0.8), a)
    for v in est.vectors.values():
        assert np.linalg.norm(v.A) == pytest.approx(0.8, abs=1e-12)
        assert np.allclose(v.A / np.linalg.norm(v.A), a, atol=1e-12)


def test_fit_gisin():
    est = fit_conditional_vectors(Gisin(), T00)
    assert np.allclose(est.vectors[(0, 0)].V, T00, atol=1e-12)
    assert np.allclose(est.vectors[(0, 0)].A, T00, atol=1e-12)
    assert not est.vectors[(1, 1)].estimable
    assert est.fidelity() == pytest.approx(1.0)


@pytest.mark.parametrize("protocol", [Ideal(0.3), GisinHashed(), PCrit(), PCrit(0.8, True), LowFidelity()], ids=str)
def test_fit_recovers_linear_models(protocol, rng):
    for a in sample_uniform_sphere(rng, 50):
        est = fit_conditional_vectors(protocol, a, LINEARITY_SETTINGS)
        assert est.residual < 1e-10


def test_fit_rejects_coplanar():
    with pytest.raises(ValueError, match="do not span"):
        fit_conditional_vectors(Ideal(), Z, [X, Y, -X, -Y, (X + Y) / math.sqrt(2)])
    with pytest.raises(ValueError, match="do not span"):
        fit_conditional_vectors(Ideal(), Z, [X, Y, Z])


def test_fit_on_sampled_table():
    a = np.array([0.48, -0.6, 0.64])
    t = ExperimentTable.simulate(Ideal(1.0), [(a, b) for b in AXIS_SETTINGS], 200_000, np.random.default_rng(3))
    est = fit_conditional_vectors(t, a)
    for v in est.vectors.values():
        assert np.allclose(v.A, a, atol=0.02)
        assert v.count == pytest.approx(300_000, rel=0.02)


def _cubic_table(settings, runs, seed):
    # Bob answers with <beta> = b_z^3 whatever Alice announces
    rng = np.random.default_rng(seed)
    b = np.repeat(settings, runs, axis=0)
    n = b.shape[0]
    beta = np.where(rng.random(n) < 0.5 * (1 + b[:, 2] ** 3), 1, -1)
    c = rng.integers(0, 4, n)
    return ExperimentTable(np.broadcast_to(Z, (n, 3)), b, c >> 1, c & 1, beta)


def test_linearity_catches_cubic():
    t = _cubic_table(LINEARITY_SETTINGS, 100_000, 4)
    res = check_linearity(fit_conditional_vectors(t, Z, LINEARITY_SETTINGS), 0.05)
    assert not res.passed
    assert res.statistic > 0.1


def test_cubic_invisible_on_axes():
    # on +-x, +-y, +-z the cube coincides with the linear map b_z
    t = _cubic_table(AXIS_SETTINGS, 100_000, 5)
    assert check_linearity(fit_conditional_vectors(t, Z), 0.05).passed


def test_linearity_exact_models():
    assert check_linearity(fit_conditional_vectors(Ideal(), X)).statistic == pytest.approx(0.0, abs=1e-15)
    assert check_linearity(fit_conditional_vectors(Gisin(), [0.48, -0.6, 0.64], LINEARITY_SETTINGS)).passed


# marginals ------------------------------------------------------------------------


def test_marginal_examples(rng):
    a = sample_uniform_sphere(rng, 20)
    dists = [Ideal(0.4).distribution(x, y) for x, y in zip(a, a[::-1])]
    assert check_alice_marginal(dists).statistic == pytest.approx(0.0, abs=1e-15)
    res = check_alice_marginal(Gisin().distribution(T00, X))
    assert not res.passed and res.statistic == pytest.approx(0.75)
    assert check_alice_marginal([GisinHashed().distribution(x, X) for x in a]).passed


def test_marginal_on_tables():
    rng = np.random.default_rng(6)
    pairs = [(a, X) for a in sample_uniform_sphere(rng, 4)]
    assert check_alice_marginal(ExperimentTable.simulate(GisinHashed(), pairs, 20_000, rng)).passed
    assert not check_alice_marginal(ExperimentTable.simulate(Gisin(), pairs, 20_000, rng)).passed


# no-signalling ------------------------------------------------------------------


def test_no_signaling_flags_active_data():
    rng = np.random.default_rng(7)
    pairs = [(a, b) for a in (X, Y) for b in LINEARITY_SETTINGS]
    tb = ExperimentTable.simulate(TonerBaconActive(), pairs, 2000, rng)
    assert not check_no_signaling(tb).passed
    with pytest.raises(ActiveCompensationError, match="active-compensation data cannot be certified in separated mode"):
        require_separated(tb)
    honest = ExperimentTable.simulate(Ideal(), pairs, 2000, rng)
    assert require_separated(honest).passed


# CSV ------------------------------------------------------------------------------

HEADER = "ax,ay,az,bx,by,bz,c0,c1,beta\n"


def test_csv_row(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(HEADER + "1,0,0,0,0,1,0,1,-1\n")
    t = ingest_csv(p)
    assert len(t) == 1
    assert np.array_equal(t.a[0], X) and np.array_equal(t.b[0], Z)
    assert (t.c0[0], t.c1[0], t.beta[0]) == (0, 1, -1)


def test_csv_empty(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    assert len(ingest_csv(p)) == 0
    p.write_text(HEADER)
    assert len(ingest_csv(p)) == 0


@pytest.mark.parametrize(
    "body, line",
    [
        ("1,0,0,0,0,1,0,1\n", 2),
        ("1,0,0,0,0,1,0,1,-1\n1,0,0,0,0,1,0,2,-1\n", 3),
        ("1,0,0,0,0,1,0,1,0\n", 2),
        ("1,0,0,0,0,1,0,1,x\n", 2),
        ("1,0,0.1,0,0,1,0,1,1\n", 2),
    ],
)
def test_csv_errors(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(HEADER + body)
    with pytest.raises(CsvFormatError, match=f"line {line}") as info:
        ingest_csv(p)
    assert info.value.line == line


def test_csv_header_required(tmp_path):
    p = tmp_path / "nh.csv"
    p.write_text("1,0,0,0,0,1,0,1,-1\n")
    with pytest.raises(CsvFormatError, match="line 1"):
        ingest_csv(p)


@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_csv_round_trip(seed, n):
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(seed)
    t = ExperimentTable(
        sample_uniform_sphere(rng, n),
        sample_uniform_sphere(rng, n),
        rng.integers(0, 2, n),
        rng.integers(0, 2, n),
        2 * rng.integers(0, 2, n) - 1,
    )
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "t.csv"
        export_csv(t, path)
        back = ingest_csv(path)
    assert np.max(np.abs(back.a - t.a)) <= 1e-15
    assert np.max(np.abs(back.b - t.b)) <= 1e-15
    assert np.array_equal(back.c0, t.c0) and np.array_equal(back.c1, t.c1) and np.array_equal(back.beta, t.beta)


def test_table_validation():
    with pytest.raises(ValueError):
        ExperimentTable([X], [Z], [2], [0], [1])
    with pytest.raises(ValueError):
        ExperimentTable([X], [Z], [0], [0], [0])
    with pytest.raises(ValueError):
        ExperimentTable([[1.0, 0.1, 0.0]], [Z], [0], [0], [1])


def test_fit_accepts_grouping_keys():
    # the rounded key is slightly off the sphere; looking it up must not renormalize it first
    rng = np.random.default_rng(8)
    pairs = [(a, b) for a in sample_uniform_sphere(rng, 30) for b in AXIS_SETTINGS]
    t = ExperimentTable.simulate(Ideal(0.6), pairs, 20, rng)
    for key in t.inputs():
        assert fit_conditional_vectors(t, np.array(key)).vectors
