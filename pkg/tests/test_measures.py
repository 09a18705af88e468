"""
Classical Measure Tests.

Validates that:
1. Known tables give known D, D', r, lambda, Q, MI values
2. Table functions and vectorized kernels agree
3. Relabeling a table acts on each measure as symmetry_image says
4. Kernels mark 0/0 evaluations as NaN
"""

import math

import numpy as np
import pytest

from ldcanon.measures import (
    CLASSICAL_KERNELS,
    MeasureId,
    MeasureValue,
    correlation_r,
    d_coeff,
    d_prime,
    dprime_kernel,
    log_lambda_kernel,
    mutual_information,
    q_kernel,
    r_kernel,
    symmetry_image,
    yules_q,
)
from ldcanon.tables import SymmetryElement, apply_symmetry, make_prob_table, odds_ratio

T1 = make_prob_table((0.375, 0.125, 0.125, 0.375))
ASYM = make_prob_table((0.5, 0.1, 0.15, 0.25))
NEGATIVE = make_prob_table((0.1, 0.4, 0.3, 0.2))

TABLE_FUNCTIONS = {
    MeasureId.D: d_coeff,
    MeasureId.DPRIME: d_prime,
    MeasureId.R: correlation_r,
    MeasureId.LAMBDA: odds_ratio,
    MeasureId.Q: yules_q,
    MeasureId.MI: mutual_information,
}


def test_reference_table_values():
    """Half-marginal table with lambda = 9."""
    assert d_coeff(T1) == pytest.approx(0.125)
    assert d_prime(T1) == pytest.approx(0.5)
    assert correlation_r(T1) == pytest.approx(0.5)
    assert odds_ratio(T1) == pytest.approx(9.0)
    assert yules_q(T1) == pytest.approx(0.8)


def test_dprime_negative_branch():
    # D = 0.1 - 0.5 * 0.4 = -0.1; D_max = min(0.5*0.4, 0.5*0.6) = 0.2
    assert d_coeff(NEGATIVE) == pytest.approx(-0.1)
    assert d_prime(NEGATIVE) == pytest.approx(-0.5)


def test_independent_table_is_zero_everywhere():
    t = make_prob_table((0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4))
    assert d_coeff(t) == pytest.approx(0.0, abs=1e-15)
    assert d_prime(t) == pytest.approx(0.0, abs=1e-12)
    assert correlation_r(t) == pytest.approx(0.0, abs=1e-12)
    assert odds_ratio(t) == pytest.approx(1.0)
    assert yules_q(t) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(t) == pytest.approx(0.0, abs=1e-12)


def test_bounded_measures_stay_in_range():
    rng = np.random.default_rng(3)
    for cells in rng.dirichlet(np.full(4, 0.3), size=200):
        t = make_prob_table(np.maximum(cells, 1e-300))
        for fn in (d_prime, correlation_r, yules_q):
            assert -1.0 <= fn(t) <= 1.0
        assert mutual_information(t) >= 0.0


def test_q_is_tanh_of_half_log_lambda():
    for t in (T1, ASYM, NEGATIVE):
        assert yules_q(t) == pytest.approx(math.tanh(0.5 * math.log(odds_ratio(t))), abs=1e-14)


def test_mutual_information_perfect_association_is_one_bit():
    t = make_prob_table((0.5, 1e-300, 1e-300, 0.5))
    assert mutual_information(t) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("measure", list(TABLE_FUNCTIONS))
def test_kernels_match_table_functions(measure):
    tables = [T1, ASYM, NEGATIVE]
    cells = np.array([t.cells() for t in tables])
    got = CLASSICAL_KERNELS[measure](cells)
    want = [TABLE_FUNCTIONS[measure](t) for t in tables]
    assert got == pytest.approx(want, rel=1e-12, abs=1e-15), f"{measure.value}"


@pytest.mark.parametrize("measure", list(TABLE_FUNCTIONS))
def test_symmetry_image(measure):
    fn = TABLE_FUNCTIONS[measure]
    base = fn(ASYM)
    for s in SymmetryElement:
        relabeled = fn(apply_symmetry(ASYM, s))
        assert relabeled == pytest.approx(symmetry_image(measure, base, s), rel=1e-12, abs=1e-15), \
            f"{measure.value} under {s.value}"


def test_kernels_zero_cells():
    cells = np.array([
        [5, 0, 0, 5],     # perfect positive association
        [0, 5, 5, 0],     # perfect negative association
        [5, 5, 0, 0],     # monomorphic column marker
        [3, 0, 1, 0],     # 0/0 odds ratio
    ], dtype=float) / 10.0
    s = log_lambda_kernel(cells)
    assert s[0] == math.inf and s[1] == -math.inf
    assert math.isnan(s[3])
    assert q_kernel(cells)[:2] == pytest.approx([1.0, -1.0])
    assert dprime_kernel(cells)[:2] == pytest.approx([1.0, -1.0])
    assert math.isnan(r_kernel(cells)[2])


def test_measure_value_to_dict_nulls_undefined():
    d = MeasureValue(MeasureId.LAMBDA, math.nan, defined=False).to_dict()
    assert d["measure"] == "lambda"
    assert d["value"] is None
    assert d["defined"] is False
