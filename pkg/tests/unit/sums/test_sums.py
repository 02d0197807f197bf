# Copyright 2019 bo-invariance Developers
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import pytest

import numpy as np

import bo_invariance as bo
from bo_invariance import sums, exceptions


def test_constrained_sum_counts_tuples():
    assert bo.constrained_sum(lambda j, k: np.ones(len(j)), None, 2, arity=2) == 16
    assert bo.constrained_sum(lambda j, k: np.ones(len(j)), lambda j, k: j + k == 0, 2, arity=2) == 4


def test_constrained_sum_with_empty_predicate():
    assert bo.constrained_sum(lambda a: 1 / a, lambda a: a > 10, 3, arity=1) == 0.0


@pytest.mark.parametrize("N, arity", [(4, 0), (4, 4), (0, 2)])
def test_constrained_sum_rejects_bad_arguments(N, arity):
    with pytest.raises(exceptions.InvalidParameters):
        bo.constrained_sum(lambda *j: np.ones(len(j[0])), None, N, arity=arity)


def test_edge_quadratic_sum():
    expected = 2 * (1 / 25 + 1 / 36 + 1 / 49)

    assert sums.edge_quadratic_sum(8, 0.5) == pytest.approx(expected)


def test_density_cubic_sum_decreases_with_N():
    values = [sums.density_cubic_sum(N, 0.25) for N in (8, 16, 32)]

    assert all(v > 0 for v in values)
    assert values[0] > values[1] > values[2]


def test_log_tail_sum_is_positive():
    assert sums.log_tail_sum(8, 0.25) > 0


def test_named_sums():
    assert sums.named_sum("edge-quadratic", 8, 0.5) == sums.edge_quadratic_sum(8, 0.5)

    with pytest.raises(exceptions.UnknownForm):
        sums.named_sum("nope", 8, 0.5)


def test_sum_table():
    table = sums.sum_table("edge-quadratic", [(8, 0.5), (16, 0.5)])

    assert [row["N"] for row in table] == [8, 16]
    assert table[0]["value"] == pytest.approx(sums.edge_quadratic_sum(8, 0.5))


def test_decay_fit_recovers_exact_model():
    eps = [0.05, 0.1, 0.2, 0.4]
    fit = bo.decay_fit([(e, 3 * np.sqrt(e)) for e in eps], "sqrt-eps")

    assert fit.success
    assert fit.constant == pytest.approx(3)
    assert fit.envelope == pytest.approx(1)
    assert fit.max_residual < 1e-10


def test_decay_fit_on_N_eps_pairs():
    points = [((N, 0.25), 2 / N) for N in (8, 16, 32, 64)]
    fit = bo.decay_fit(points, "inverse-N")

    assert fit.success
    assert fit.constant == pytest.approx(2)


def test_decay_fit_with_several_models():
    Ns = [4, 8, 16, 32, 64]
    fit = bo.decay_fit([(N, 2 / np.sqrt(N)) for N in Ns], ["inverse-sqrtN", "inverse-N"])

    assert fit.success
    assert fit.constants[0] == pytest.approx(2, rel=1e-6)
    assert fit.constants[1] == pytest.approx(0, abs=1e-6)


def test_decay_fit_reports_bad_shape():
    fit = bo.decay_fit([(e, 1 / e) for e in (0.05, 0.1, 0.2, 0.4)], "sqrt-eps")

    assert not fit.success
    assert fit.message
    assert fit.envelope >= 1


@pytest.mark.parametrize(
    "values",
    [
        [(0.1, 1.0), (0.2, 2.0)],
        [(0.1, 1.0), (0.2, 0.0), (0.3, 1.0), (0.4, 1.0)],
        [(0.1, 1.0), (0.2, np.nan), (0.3, 1.0), (0.4, 1.0)],
    ],
)
def test_degenerate_data_fail_without_raising(values):
    fit = bo.decay_fit(values, "sqrt-eps")

    assert not fit.success
    assert np.isnan(fit.constant)


def test_unknown_rate_model():
    with pytest.raises(exceptions.UnknownForm):
        bo.decay_fit([(0.1, 1.0)] * 4, "exp")


def test_decay_fit_json_round_trip():
    fit = bo.decay_fit([(e, np.sqrt(e)) for e in (0.05, 0.1, 0.2, 0.4)], "sqrt-eps")

    assert sums.DecayFit.from_json(fit.to_json()).to_json() == fit.to_json()


def test_slope_fit_of_power_law():
    x = np.array([8, 16, 32, 64])
    fit = bo.slope_fit(x, 5 * x ** -0.5)

    assert fit.success
    assert fit.monotone
    assert fit.rate == pytest.approx(0.5)


def test_slope_fit_sorts_by_x():
    fit = bo.slope_fit([32, 8, 16], [0.25, 1.0, 0.5])

    assert fit.monotone
    assert fit.slope == pytest.approx(-1)


def test_slope_fit_flags_non_monotone_data():
    fit = bo.slope_fit([8, 16, 32], [1.0, 0.5, 0.6])

    assert not fit.monotone
    assert not fit.success


def test_slope_fit_without_monotonicity_requirement():
    fit = bo.slope_fit([8, 16, 32], [1.0, 2.0, 4.0], require_decreasing=False)

    assert fit.success
    assert fit.slope == pytest.approx(1)


def test_slope_fit_needs_positive_points():
    assert not bo.slope_fit([1], [1.0]).success
    assert not bo.slope_fit([1, 2], [1.0, -1.0]).success
