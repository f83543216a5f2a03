"""Invariant checks over randomized inputs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebin.analysis import RateReport, car, klyshko
from timebin.quantum import DensityMatrix2Q, chsh_bounds, concurrence
from timebin.tomography import MeasurementRecord

from conftest import ginibre_density_matrix

KEYS = [(a, b) for a in ("Z0", "Z1", "X+", "Y+") for b in ("Z0", "Z1", "X+", "Y+")]


@given(st.floats(min_value=0.0, max_value=1.0))
def test_chsh_bounds_ordered_and_in_range(c):
    lo, hi = chsh_bounds(c)
    assert 0.0 <= lo <= hi + 1e-12
    assert hi <= 2 * np.sqrt(2) + 1e-12


@given(st.integers(min_value=1, max_value=10**6),
       st.integers(min_value=1, max_value=10**6),
       st.integers(min_value=1, max_value=10**4),
       st.integers(min_value=2, max_value=20))
def test_car_invariant_under_duration_rescaling(ns, ni, nc, k):
    # CAR is a ratio of rates, so scaling every count by the same factor
    # (longer run, same physics) leaves the value unchanged
    a = car(RateReport(ns, ni, nc, 10**7, 1.0))
    b = car(RateReport(k * ns, k * ni, k * nc, k * 10**7, float(k)))
    assert b.value == pytest.approx(a.value, rel=1e-12)
    assert b.error < a.error


@given(st.integers(min_value=1, max_value=10**6),
       st.integers(min_value=1, max_value=10**6),
       st.integers(min_value=0, max_value=10**4))
def test_klyshko_bounded_by_count_ratio(ns, ni, nc):
    eta_s, eta_i = klyshko(RateReport(ns, ni, nc, 10**7, 1.0))
    assert eta_s.value == pytest.approx(nc / ni)
    assert eta_i.value == pytest.approx(nc / ns)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_density_matrix_invariants(seed):
    rng = np.random.default_rng(seed)
    rho = ginibre_density_matrix(rng)
    dm = DensityMatrix2Q.from_matrix(rho, fix=True)
    m = dm.matrix
    assert np.allclose(m, m.conj().T, atol=1e-12)
    assert np.trace(m).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(m).min() >= -1e-9
    c = concurrence(dm)
    assert 0.0 <= c <= 1.0 + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_density_matrix_json_round_trip(seed):
    rng = np.random.default_rng(seed)
    dm = DensityMatrix2Q.from_matrix(ginibre_density_matrix(rng))
    again = DensityMatrix2Q.from_json(dm.to_json())
    assert np.array_equal(dm.matrix, again.matrix)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_measurement_record_json_round_trip(seed):
    rng = np.random.default_rng(seed)
    counts = {k: int(rng.integers(0, 10**6)) for k in KEYS}
    rec = MeasurementRecord(counts=counts)
    back = MeasurementRecord.from_json(rec.to_json())
    assert back.counts == rec.counts


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_record_swap_is_involution(seed):
    rng = np.random.default_rng(seed)
    counts = {k: int(rng.integers(0, 1000)) for k in KEYS}
    rec = MeasurementRecord(counts=counts)
    assert rec.swapped().swapped().counts == rec.counts
