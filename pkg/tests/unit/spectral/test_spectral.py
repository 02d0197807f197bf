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

import pickle

import numpy as np

import bo_invariance as bo
from bo_invariance import spectral, exceptions


def test_zero_mode_must_vanish():
    with pytest.raises(exceptions.InvalidField):
        bo.SpectralField([1.0, 0.5])


def test_non_finite_coefficients_are_rejected():
    with pytest.raises(exceptions.InvalidField):
        bo.SpectralField([0, np.nan])


def test_from_modes_conjugates_negative_frequencies():
    f = bo.SpectralField.from_modes({-2: 1 + 1j}, n_modes=3)

    assert f[2] == 1 - 1j
    assert f[-2] == 1 + 1j
    assert f.n_modes == 3


def test_from_modes_rejects_zero_mode():
    with pytest.raises(exceptions.InvalidField):
        bo.SpectralField.from_modes({0: 1.0})


def test_from_modes_rejects_too_few_modes():
    with pytest.raises(exceptions.InvalidField):
        bo.SpectralField.from_modes({5: 1.0}, n_modes=3)


def test_fields_are_immutable(cosine):
    with pytest.raises(ValueError):
        cosine.coefficients[1] = 2


def test_resized_pads_and_truncates(smooth_field):
    assert smooth_field.resized(20).n_modes == 20
    assert smooth_field.resized(20)[3] == smooth_field[3]
    assert smooth_field.resized(2).support() == 2


def test_arithmetic_aligns_mode_counts(cosine, smooth_field):
    total = cosine + smooth_field

    assert total.n_modes == smooth_field.n_modes
    assert total[1] == pytest.approx(0.8)
    assert np.allclose((total - smooth_field).coefficients, cosine.resized(smooth_field.n_modes).coefficients)


def test_real_scaling(cosine):
    assert (2 * cosine)[1] == 1.0


def test_two_sided_is_hermitian(smooth_field):
    c = smooth_field.two_sided()
    n = smooth_field.n_modes

    assert np.allclose(c[n + 1 :], np.conj(c[:n][::-1]))
    assert bo.SpectralField.from_two_sided(c) == smooth_field


def test_from_two_sided_rejects_non_hermitian():
    with pytest.raises(exceptions.InvalidField):
        bo.SpectralField.from_two_sided([1j, 0, 1j])


def test_pickling_round_trip(smooth_field):
    assert pickle.loads(pickle.dumps(smooth_field)) == smooth_field


def test_cosine_samples(cosine):
    grid = bo.TorusGrid(1, n_points=16, degree=1)

    assert np.allclose(grid.to_physical(cosine.coefficients), np.cos(grid.nodes))


def test_from_physical_drops_the_mean():
    grid = bo.TorusGrid(4, n_points=16, degree=1)
    samples = 2 + np.cos(grid.nodes) + 3 * np.sin(2 * grid.nodes)

    f = spectral.from_physical(samples, grid)

    assert f.coefficients[0] == 0
    assert f.coefficients[1] == pytest.approx(0.5)
    assert f.coefficients[2] == pytest.approx(-1.5j)


def test_hilbert_of_cosine_is_sine(cosine):
    grid = bo.TorusGrid(1, n_points=16, degree=1)
    h = bo.hilbert(cosine)

    assert np.allclose(grid.to_physical(h.coefficients), np.sin(grid.nodes))


def test_hilbert_squares_to_minus_identity(smooth_field):
    twice = bo.hilbert(bo.hilbert(smooth_field))

    assert np.allclose(twice.coefficients, -smooth_field.coefficients)


def test_antiderivative_inverts_derivative(smooth_field):
    back = spectral.derivative(spectral.antiderivative(smooth_field))

    assert np.allclose(back.coefficients, smooth_field.coefficients)


def test_sobolev_norms_of_cosine(cosine):
    assert bo.sobolev_norm_sq(cosine, 0) == pytest.approx(0.5)
    assert bo.sobolev_norm_sq(cosine, 1) == pytest.approx(0.5)
    assert bo.sobolev_norm(cosine, 1, homogeneous=False) == pytest.approx(1.0)


def test_sobolev_norm_weights_frequency():
    f = bo.SpectralField.from_modes({3: 1.0})

    assert bo.sobolev_norm_sq(f, 1) == pytest.approx(2 * 9)


def test_integrate_products(cosine):
    assert bo.integrate(cosine, cosine) == pytest.approx(np.pi)
    assert bo.average(cosine, cosine, cosine, cosine) == pytest.approx(3 / 8)
    assert bo.average(cosine, cosine, cosine) == pytest.approx(0, abs=1e-15)


def test_integrate_rejects_too_many_factors(cosine):
    with pytest.raises(exceptions.InvalidParameters):
        bo.integrate(*([cosine] * 7))


def test_integrate_rejects_small_grid(smooth_field):
    grid = bo.TorusGrid(8, degree=1)

    with pytest.raises(exceptions.InvalidGrid):
        bo.integrate(smooth_field, smooth_field, smooth_field, grid=grid)


@pytest.mark.parametrize("eps", [0.1, 0.25, 0.5])
def test_smooth_cutoff_shape(eps):
    psi = bo.SmoothCutoff(eps)

    assert psi(0.0) == 1.0
    assert psi(1 - eps) == 1.0
    assert psi(1.0) == 0.0
    assert psi(1.5) == 0.0
    assert 0 < psi(1 - eps / 2) < 1
    assert psi(-0.5) == psi(0.5)


@pytest.mark.parametrize("eps", [0, 1, -0.1, 1.5])
def test_smooth_cutoff_rejects_bad_eps(eps):
    with pytest.raises(exceptions.InvalidParameters):
        bo.SmoothCutoff(eps)


def test_bump_bridge_is_monotone():
    t = np.linspace(-0.5, 1.5, 201)
    values = spectral.bump_bridge(t)

    assert np.all(np.diff(values) >= -1e-15)
    assert values[0] == 0
    assert values[-1] == 1


def test_dirichlet_projection_keeps_low_modes(smooth_field):
    low = bo.dirichlet_project(smooth_field, 2)

    assert low.support() == 2
    assert low[1] == smooth_field[1]


def test_smooth_projection_fixes_flat_region_and_kills_edge():
    f = bo.SpectralField.from_modes({1: 1.0, 2: 1.0, 8: 1.0})
    v = bo.smooth_project(f, 8, 0.5)

    assert v[1] == 1.0
    assert v[2] == 1.0
    assert v[8] == 0


@pytest.mark.parametrize("N, eps", [(0, 0.5), (2.5, 0.5), (4, 0.0), (4, 1.0)])
def test_projection_parameters_are_checked(N, eps):
    with pytest.raises(exceptions.InvalidParameters):
        spectral.check_projection_parameters(N, eps)


def test_grid_sizes_follow_exactness_rule():
    grid = bo.TorusGrid(10, degree=5)

    assert grid.n_points >= 61
    assert grid.supports(10, 5)


def test_grid_rejects_too_few_points():
    with pytest.raises(exceptions.InvalidGrid):
        bo.TorusGrid(10, n_points=16, degree=5)


def test_complex_field_round_trip_to_real(smooth_field):
    c = bo.ComplexField.from_real(smooth_field)

    assert c.to_real() == smooth_field
    assert c.l2_norm() == pytest.approx(np.sqrt(bo.sobolev_norm_sq(smooth_field, 0)))


def test_complex_field_positive_part(smooth_field):
    c = bo.ComplexField.from_real(smooth_field)
    plus = c.positive_part()

    assert plus[-1] == 0
    assert plus[1] == smooth_field[1]


def test_multiplier_composition(smooth_field):
    H = spectral.hilbert_multiplier()
    D = spectral.derivative_multiplier()
    HD = H @ D

    assert np.allclose(HD(smooth_field).coefficients, H(D(smooth_field)).coefficients)
