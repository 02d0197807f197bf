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
from bo_invariance import experiments, exceptions
from bo_invariance.wick import SumEstimate, Method


def test_cross_route_agrees_draw_by_draw():
    report = experiments.cross_route_check(4, 0.5, bo.EnsembleSpec(20, base_seed=3))

    assert report.results["pathwise_difference"] <= 1e-8
    assert report.checks["routes agree draw by draw"].status is bo.CheckStatus.PASSED
    assert report.results["wick"].method is Method.EXACT
    assert report.results["sampled"].method is Method.MONTE_CARLO


def test_filtered_draws_give_no_derivative():
    report = experiments.derivative_experiment(8, 0.5, bo.EnsembleSpec(10), filtered=True)

    assert report.parameters["support"] == 2
    assert report.results["dE/dt"].value <= 1e-12
    assert report.passed


def test_mu32_derivative_reports_blocks():
    report = experiments.derivative_experiment(6, 0.5, bo.EnsembleSpec(10), measure="mu32")

    for block in ("total", "cubic", "quartic", "quintic", "sextic"):
        assert f"dG/dt {block}" in report.results
    assert report.checks["cubic block cancels"].status is bo.CheckStatus.PASSED


def test_mu32_norm_is_the_block_total():
    spec = bo.EnsembleSpec(6, base_seed=9)

    blocks, _ = experiments.derivative_blocks_mu32(6, 0.5, spec)

    assert experiments.derivative_norm_mu32(6, 0.5, spec).value == blocks["total"].value


def test_unknown_derivative_measure():
    with pytest.raises(exceptions.InvalidParameters):
        experiments.derivative_experiment(6, 0.5, bo.EnsembleSpec(4), measure="mu2")


def test_mapper_does_not_change_the_estimate():
    spec = bo.EnsembleSpec(12, base_seed=2)

    a = experiments.derivative_norm_mu1(6, 0.5, spec)
    b = experiments.derivative_norm_mu1(6, 0.5, spec, mapper=lambda f, xs: [f(x) for x in reversed(list(xs))][::-1])

    assert a.value == b.value


def test_whole_space_is_transported_onto_itself():
    report = experiments.transport_experiment(np.inf, 4, 0.5, 1.0, [0.05, 0.02], bo.EnsembleSpec(6))

    assert [row["t"] for row in report.tables["transport"]] == [0.0, 0.02, 0.05]
    assert all(row["difference"] == 0 for row in report.tables["transport"])
    assert report.results["acceptance"] == 1.0
    assert report.passed
    assert "difference_vs_t" not in report.fits


def test_tiny_ball_is_flagged():
    report = experiments.transport_experiment(1e-6, 4, 0.5, 1.0, [0.02], bo.EnsembleSpec(6))

    assert report.results["acceptance"] == 0.0
    assert report.checks["ball indicator variance"].status is bo.CheckStatus.FLAGGED


def test_negative_times_are_rejected():
    with pytest.raises(exceptions.InvalidParameters):
        experiments.transport_experiment(np.inf, 4, 0.5, 1.0, [-0.1], bo.EnsembleSpec(4))


def test_transport_slope_needs_positive_time():
    with pytest.raises(exceptions.InvalidParameters):
        experiments.transport_slope(np.inf, 4, 0.5, 1.0, 0.0, bo.EnsembleSpec(4))


def test_transport_slope_of_the_whole_space_is_zero():
    slope = experiments.transport_slope(np.inf, 4, 0.5, 1.0, 0.02, bo.EnsembleSpec(4))

    assert slope.value == 0
    assert slope.method is Method.MONTE_CARLO


def test_monotonicity_of_the_whole_space():
    report = experiments.monotonicity_probe(np.inf, 0.02, 4, 0.5, 1.0, bo.EnsembleSpec(4), resolution=16)

    assert report.results["gain"].value == 0
    assert report.checks["image weight is not smaller"].status is bo.CheckStatus.PASSED


def test_backward_flow_of_zero_span_is_identity(smooth_field):
    assert experiments.BackwardFlow(8, 0.25)(smooth_field, 0.0) is smooth_field


def test_backward_flow_respects_the_step_guard():
    assert experiments.BackwardFlow(16, 0.25, dt=1.0).dt <= bo.dynamics.MAX_DT_N_SQUARED / 16 ** 2


def test_density_convergence_tables():
    report = experiments.density_convergence([16, 8], 0.25, 1.0, bo.EnsembleSpec(8))

    assert report.parameters["N_list"] == [8, 16]
    assert [(r["density"], r["N"]) for r in report.tables["density"]] == [("F", 8), ("F", 16), ("H", 8), ("H", 16)]
    assert all(r["mean"] >= 0 for r in report.tables["density"])
    assert len(report.tables["density-cubic"]) == 2
    assert report.checks["cubic sum decreases"].status is bo.CheckStatus.PASSED


def test_density_difference_needs_a_known_measure():
    with pytest.raises(exceptions.InvalidParameters):
        experiments.density_difference(8, 0.5, 1.0, bo.EnsembleSpec(4), k_half=2.0)


def test_convergence_on_given_initial_data(smooth_field):
    report = experiments.convergence_experiment([8, 4], 0.25, 0.05, 0.1, 0.05, phi_set=[smooth_field], N_ref=32)

    assert [r["N"] for r in report.tables["errors"]] == [4, 8]
    assert all(r["error"] >= 0 for r in report.tables["errors"])
    assert report.results["initial_radius"] > 0
    assert report.parameters["initial_data"] == 1
    assert "error_vs_N" in report.fits


def test_convergence_on_sampled_data_steps_within_the_guard():
    report = experiments.convergence_experiment([16, 32], 0.25, 0.01, 0.2, 0.1, spec=bo.EnsembleSpec(1), N_ref=128)

    assert [r["N"] for r in report.tables["errors"]] == [16, 32]
    assert all(np.isfinite(r["error"]) and r["error"] > 0 for r in report.tables["errors"])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(phi_set=None, spec=None),
        dict(N_ref=16),
        dict(sigma=0.05, sigma_prime=0.1),
    ],
)
def test_convergence_rejects_bad_arguments(smooth_field, kwargs):
    arguments = dict(N_list=[4, 8], eps=0.25, t=0.05, sigma=0.1, sigma_prime=0.05, phi_set=[smooth_field])
    arguments.update(kwargs)

    with pytest.raises(exceptions.InvalidParameters):
        experiments.convergence_experiment(**arguments)


def test_convergence_needs_exactly_one_source_of_data(smooth_field):
    with pytest.raises(exceptions.InvalidParameters):
        experiments.convergence_experiment(
            [4], 0.25, 0.05, 0.1, 0.05, spec=bo.EnsembleSpec(2), phi_set=[smooth_field]
        )


def test_lattice_norm_pairwise_comparison():
    report = experiments.lattice_norm("cubic-F", 4, 0.5, exact=True, compare=True)

    assert report.results["norm"].method is Method.EXACT
    assert report.results["terms"] > 0
    assert report.checks["pairwise sum agrees"].status is bo.CheckStatus.PASSED


def test_cancellation_report():
    report = experiments.cancellation_report(["quartic-E1-bulk", "quartic-G-bulk"], [8], [0.25, 0.5])

    assert len(report.tables["residuals"]) == 4
    assert report.results["worst"] <= 1e-12
    assert report.passed


def test_centering_check():
    report = experiments.centering_check(8, bo.EnsembleSpec(400, base_seed=11))

    mean = report.results["mean"]
    assert mean.standard_error > 0
    assert abs(mean.value) < 5 * mean.standard_error


def test_energy_experiment_checks_the_formulas():
    report = experiments.energy_experiment(6, 0.5, bo.EnsembleSpec(3, base_seed=4))

    assert len(report.tables["energies"]) == 3
    assert report.passed
    assert report.wall_clock > 0


def test_sweep_stops_once_stable():
    def measure(N, eps):
        return SumEstimate(3 * np.sqrt(eps), Method.MONTE_CARLO, 1e-3, samples=100, N=N, eps=eps)

    report = experiments.sweep_protocol([4, 8, 16], [0.05, 0.4, 0.1, 0.2], measure)

    assert [r["eps"] for r in report.tables["limits"]] == [0.4, 0.2, 0.1, 0.05]
    assert all(r["N"] == 8 and r["stable"] for r in report.tables["limits"])
    assert len(report.tables["sweep"]) == 8
    assert report.passed
    fit = report.fits["sqrt-eps"]
    assert fit.success
    assert fit.constant == pytest.approx(3)


def test_sweep_without_stable_values():
    def measure(N, eps):
        return SumEstimate(float(N), Method.MONTE_CARLO, 1e-3, samples=100)

    report = experiments.sweep_protocol([4, 8, 16], [0.1], measure, model=None)

    assert report.tables["limits"] == [dict(eps=0.1, N=16, value=16.0, standard_error=1e-3, stable=False)]
    assert report.fits == {}


def test_decay_envelope_uses_exact_norms():
    points = [(N, 0.5) for N in (4, 6, 8, 10)]

    report = experiments.decay_envelope("cubic-F", points, "inverse-sqrtN")

    assert [r["method"] for r in report.tables["norms"]] == ["exact"] * 4
    assert "inverse-sqrtN" in report.fits
    assert len(report.checks) == 1


def test_experiment_reports_are_emitted(tmp_path):
    report = experiments.transport_experiment(np.inf, 4, 0.5, 1.0, [0.02], bo.EnsembleSpec(4))

    paths = bo.emit_report(report, tmp_path)

    assert {p.name for p in paths} == {"transport.json", "transport.csv", "transport.svg"}
    assert bo.load_report(tmp_path / "transport.json").passed


@pytest.mark.slow
def test_quartic_norm_has_a_sqrt_eps_envelope():
    report = experiments.decay_envelope("quartic-E1", [(64, eps) for eps in (0.4, 0.2, 0.1, 0.05)], "sqrt-eps")

    norms = [r["value"] for r in report.tables["norms"]]

    assert [r["method"] for r in report.tables["norms"]] == ["exact"] * 4
    assert all(v > 0 for v in norms)
    assert norms[-1] < norms[0]
    assert report.fits["sqrt-eps"].success
    assert report.passed


@pytest.mark.slow
def test_sextic_norm_has_an_inverse_sqrt_N_envelope():
    report = experiments.decay_envelope(
        "sextic-G", [(N, 0.2) for N in (8, 12, 16, 24)], "inverse-sqrtN", spec=bo.EnsembleSpec(20000, base_seed=1)
    )

    assert [r["method"] for r in report.tables["norms"]] == ["exact", "exact", "exact", "monte-carlo"]
    assert report.fits["inverse-sqrtN"].success


@pytest.mark.slow
def test_flow_errors_decrease_towards_the_reference():
    report = experiments.convergence_experiment(
        [16, 32, 64, 128], 0.25, 0.05, 0.2, 0.1, spec=bo.EnsembleSpec(5, base_seed=0), N_ref=512
    )

    errors = [r["error"] for r in report.tables["errors"]]

    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert report.results["theta"] > 0
    assert report.checks["errors decrease with N"].status is bo.CheckStatus.PASSED


@pytest.mark.slow
def test_image_of_a_finite_ball_keeps_its_weight():
    report = experiments.monotonicity_probe(3.0, 0.05, 8, 0.25, 3.0, bo.EnsembleSpec(2000, base_seed=2))

    assert 0 < report.results["acceptance"] < 1
    assert report.checks["image weight is not smaller"].status is bo.CheckStatus.PASSED


@pytest.mark.slow
def test_transport_slope_shrinks_along_the_sweep():
    spec = bo.EnsembleSpec(10_000, base_seed=3)

    def measure(N, eps):
        return experiments.transport_slope(3.0, N, eps, 3.0, 0.05, spec)

    report = experiments.sweep_protocol([16, 32, 64], [0.5, 0.25, 0.125], measure, name="transport-sweep", model=None)

    assert len(report.tables["limits"]) == 3
    assert report.checks["limit values do not increase as eps decreases"].status is bo.CheckStatus.PASSED


@pytest.mark.slow
@pytest.mark.parametrize("N", [8, 32, 128])
def test_half_energy_is_centered_on_a_large_ensemble(N):
    report = experiments.centering_check(N, bo.EnsembleSpec(100_000, base_seed=13))

    assert report.checks["centered within 3 SE"].status is bo.CheckStatus.PASSED


@pytest.mark.slow
def test_cross_route_agrees_on_a_large_ensemble():
    report = experiments.cross_route_check(8, 0.5, bo.EnsembleSpec(4000, base_seed=5))

    assert report.checks["routes agree draw by draw"].status is bo.CheckStatus.PASSED
    assert abs(report.results["sampled"].value - report.results["wick"].value) < 5 * report.results["sampled"].standard_error
