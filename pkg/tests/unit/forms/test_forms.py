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
from bo_invariance import forms, exceptions
from bo_invariance.forms import FORMS, FORM_CACHE


@pytest.mark.parametrize("n, N", [(3, 4), (4, 3), (5, 2), (6, 2)])
def test_tuple_count_matches_enumeration(n, N):
    assert forms.count_tuples(n, N) == len(forms.enumerate_tuples(n, N))


@pytest.mark.parametrize("n, N", [(3, 5), (4, 3)])
def test_tuples_are_admissible(n, N):
    t = forms.enumerate_tuples(n, N).astype(int)

    assert t.shape[1] == n
    assert np.all(t.sum(axis=1) == 0)
    assert np.all(t != 0)
    assert np.all(np.abs(t) <= N)
    assert len(np.unique(t, axis=0)) == len(t)


def test_tuples_need_two_entries():
    with pytest.raises(exceptions.InvalidParameters):
        list(forms.iter_tuple_chunks(1, 4))


def test_build_form_is_cached():
    first = forms.build_form("cubic-F", 6, 0.25)

    assert forms.build_form("cubic-F", 6, 0.25) is first
    assert ("cubic-F", 6, 0.25) in FORM_CACHE


def test_cache_can_be_cleared():
    first = forms.build_form("cubic-F", 6, 0.25)
    forms.clear_form_cache()

    assert forms.build_form("cubic-F", 6, 0.25) is not first


def test_unknown_form():
    with pytest.raises(exceptions.UnknownForm):
        forms.build_form("septic", 4, 0.25)


def test_enumeration_budget():
    assert forms.within_budget(5, 24)
    assert not forms.within_budget(5, 25)
    assert not forms.within_budget(7, 2)

    with pytest.raises(exceptions.BudgetExceeded):
        forms.build_form("quintic-E1", 25, 0.25)


@pytest.mark.parametrize("name", sorted(FORMS))
def test_evaluator_matches_enumeration(name, small_ensemble):
    form = forms.build_form(name, 4, 0.5)
    g = small_ensemble.gaussian_matrix(4, 0, 5)

    assert form.n_terms > 0
    assert np.allclose(form.evaluator(g), form.evaluate_terms(g), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("name", ["cubic-F", "quartic-E1", "quartic-G-b"])
def test_evaluator_form_has_no_terms(name):
    form = forms.evaluator_form(name, 40, 0.25)

    assert form.n_terms == 0
    assert form.evaluator is not None


def test_coefficients_vanish_in_flat_region():
    # every entry and pair sum at most (1 - eps) N
    assert forms.lambda_coeff(1, 2, 1, -4, 16, 0.5) == 0
    assert forms.delta_coeff(2, -1, -2, 1, 16, 0.5) == 0
    assert forms.gamma_coeff(1, 1, 1, -1, -2, 16, 0.5) == 0


def test_coefficients_live_on_transition_band():
    assert forms.lambda_coeff(5, -1, 5, -9, 12, 0.5) != 0


@pytest.mark.parametrize("set_name", sorted(forms.CANCELLATION_SETS))
@pytest.mark.parametrize("N", [8, 12])
@pytest.mark.parametrize("eps", [0.25, 0.5])
def test_cancellation_sets_cancel(set_name, N, eps):
    assert forms.cancellation_check(set_name, N, eps) <= 1e-12


def test_unknown_cancellation_set():
    with pytest.raises(exceptions.UnknownForm):
        forms.cancellation_check("quartic-E2-bulk", 8, 0.25)


def test_energy_derivative_form_matches_flux_formula(small_ensemble):
    N, eps = 6, 0.5
    form = forms.energy_derivative_form(N, eps)
    g = small_ensemble.gaussian_matrix(N, 0, 3)

    from_form = np.abs(form.evaluate(g))
    from_flux = np.abs([bo.dE_dt_formula(small_ensemble.sample(i, 1.0, N).field, N, eps) for i in range(3)])

    assert np.allclose(from_form, from_flux, rtol=1e-8, atol=1e-12)


def test_exact_norm_route():
    estimate = forms.estimate_form_norm("cubic-F", 6, 0.25)

    assert estimate.method is bo.Method.EXACT
    assert estimate.eps == 0.25
    assert estimate.value > 0


def test_sampled_route_needs_an_ensemble():
    with pytest.raises(exceptions.InvalidParameters):
        forms.estimate_form_norm("cubic-F", 6, 0.25, exact=False)


def test_sampled_route_agrees_with_exact_route():
    exact = forms.estimate_form_norm("quartic-E1", 6, 0.5)
    sampled = forms.estimate_form_norm("quartic-E1", 6, 0.5, spec=bo.EnsembleSpec(8000, 3), exact=False)

    assert sampled.method is bo.Method.MONTE_CARLO
    assert sampled.value == pytest.approx(exact.value, rel=0.2)
