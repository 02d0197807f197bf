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
from bo_invariance import dynamics, exceptions


@pytest.fixture(scope="function")
def cfg():
    return bo.FlowConfig(8, 0.25, dt=1e-3, t_end=0.2)


def test_linear_phase_of_cosine_at_pi(cosine):
    flipped = bo.linear_phase(cosine, np.pi)

    assert np.allclose(flipped.coefficients, (-1 * cosine).coefficients)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(N=8, eps=0.25, dt=0.0),
        dict(N=8, eps=0.25, dt=-1e-3),
        dict(N=8, eps=0.25, dt=0.5),
        dict(N=8, eps=0.25, t_end=-1.0),
        dict(N=8, eps=1.5),
        dict(N=0, eps=0.25),
    ],
)
def test_bad_flow_configs_are_rejected(kwargs):
    with pytest.raises(exceptions.InvalidParameters):
        bo.FlowConfig(**kwargs)


def test_step_guard_boundary_is_allowed():
    cfg = bo.FlowConfig(2, 0.25, dt=5.0)

    assert cfg.dt * cfg.N ** 2 == pytest.approx(dynamics.MAX_DT_N_SQUARED)


def test_flow_config_json_round_trip(cfg):
    assert bo.FlowConfig.from_json(cfg.to_json()).to_json() == cfg.to_json()


def test_high_modes_only_rotate(cfg):
    phi = bo.SpectralField.from_modes({1: 0.3, 10: 0.2}, n_modes=12)
    stepped = bo.step_truncated(phi, cfg)

    assert stepped[10] == pytest.approx(0.2 * np.exp(-1j * 100 * cfg.dt))
    assert stepped[11] == 0


@pytest.mark.parametrize("seed", range(3))
def test_invariants_are_conserved(seed):
    phi = bo.sample_mu(1.0, 32, seed=seed).field
    trajectory = bo.evolve(phi, bo.FlowConfig(32, 0.25, dt=1e-3, t_end=0.1))
    drift = bo.conservation_report(trajectory)

    assert set(drift) == {"l2_low", "half_energy"}
    assert drift["l2_low"] < 1e-8
    assert drift["half_energy"] < 1e-8


def _mass_drift(before, after):
    mass = np.sum(np.abs(before) ** 2)
    return abs(np.sum(np.abs(after) ** 2) - mass) / mass


def test_substepping_holds_the_drift_a_single_step_would_exceed():
    flow = dynamics.TruncatedFlow(bo.FlowConfig(32, 0.25, dt=1e-3))
    bound = 2 * dynamics.DRIFT_PER_UNIT_TIME * 1e-3

    single, split = [], []
    for seed in range(5):
        b = flow.low_modes(bo.sample_mu(1.0, 32, seed=seed).field.coefficients)
        single.append(_mass_drift(b, flow.rk4(b, 1e-3)))
        split.append(_mass_drift(b, flow.advance_low_modes(b, 1e-3)))

    assert max(single) > bound
    assert max(split) < bound


def test_substepping_is_deterministic():
    flow = dynamics.TruncatedFlow(bo.FlowConfig(32, 0.25, dt=1e-3))
    b = flow.low_modes(bo.sample_mu(1.0, 32, seed=0).field.coefficients)

    assert np.array_equal(flow.advance_low_modes(b, 1e-3), flow.advance_low_modes(b, 1e-3))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_invariants_are_conserved_over_unit_time(seed):
    phi = bo.sample_mu(1.0, 32, seed=seed).field
    trajectory = bo.evolve(phi, bo.FlowConfig(32, 0.25, dt=1e-3, t_end=1.0), save_every=1000)
    drift = bo.conservation_report(trajectory)

    assert drift["l2_low"] < 1e-8
    assert drift["half_energy"] < 1e-8


def test_evolve_lands_on_final_time(smooth_field):
    cfg = bo.FlowConfig(8, 0.25, dt=3e-3, t_end=0.1)
    trajectory = bo.evolve(smooth_field, cfg)

    assert trajectory.times[-1] == pytest.approx(0.1)
    assert trajectory.elapsed == pytest.approx(0.1)


def test_save_every_thins_states(smooth_field, cfg):
    trajectory = bo.evolve(smooth_field, cfg, save_every=50)

    assert len(trajectory) == 5
    assert len(trajectory.diagnostics["l2_low"]) == 201


def test_zero_time_is_the_identity(smooth_field, cfg):
    trajectory = bo.evolve(smooth_field, cfg.copy(t_end=0.0))

    assert len(trajectory) == 1
    assert trajectory.final == smooth_field


def test_backward_undoes_forward(smooth_field, cfg):
    forward = bo.evolve(smooth_field, cfg).final
    back = bo.evolve(forward, cfg, direction=bo.Direction.BACKWARD)

    assert back.times[-1] == pytest.approx(-cfg.t_end)
    assert np.allclose(back.final.coefficients[:9], smooth_field.coefficients, atol=1e-9)


def test_resume_from_checkpoint_matches_full_run(tmp_path, smooth_field, cfg):
    full = bo.evolve(smooth_field, cfg)

    half = bo.evolve(smooth_field, cfg.copy(t_end=0.1))
    path = half.save(tmp_path / "checkpoint")
    resumed = bo.evolve(smooth_field, cfg, resume=bo.Trajectory.load(path))

    assert np.allclose(resumed.final.coefficients, full.final.coefficients, rtol=0, atol=1e-14)
    assert len(resumed) == len(full)
    assert resumed.times[-1] == pytest.approx(full.times[-1])


def test_resume_in_the_wrong_direction_fails(smooth_field, cfg):
    half = bo.evolve(smooth_field, cfg.copy(t_end=0.1))

    with pytest.raises(exceptions.InvalidParameters):
        bo.evolve(smooth_field, cfg, direction=bo.Direction.BACKWARD, resume=half)


def test_trajectory_survives_save_and_load(tmp_path, smooth_field, cfg):
    trajectory = bo.evolve(smooth_field, cfg, save_every=20)
    loaded = bo.Trajectory.load(trajectory.save(tmp_path / "trajectory.npz"))

    assert loaded.direction is bo.Direction.FORWARD
    assert np.array_equal(loaded.times, trajectory.times)
    assert loaded.final == trajectory.final
    assert loaded.cfg.to_json() == cfg.to_json()


def test_loading_an_ensemble_as_a_trajectory_fails(tmp_path, small_ensemble):
    samples = list(bo.ensemble(small_ensemble, 1.0, 8))
    path = bo.gaussian.save_ensemble(tmp_path / "ensemble", small_ensemble, samples)

    with pytest.raises(exceptions.InvalidArchive) as info:
        bo.Trajectory.load(path)

    assert not isinstance(info.value, exceptions.InvalidEnsembleFile)


def test_trajectory_pickles(smooth_field, cfg):
    trajectory = bo.evolve(smooth_field, cfg, save_every=100)

    assert pickle.loads(pickle.dumps(trajectory)).final == trajectory.final


def test_large_steps_on_large_data_are_rejected():
    phi = bo.SpectralField.from_modes({1: 50.0, 2: 50.0j, 3: -50.0})
    cfg = bo.FlowConfig(8, 0.25, dt=0.3, t_end=0.3)

    with pytest.raises(exceptions.StepRejected):
        dynamics.TruncatedFlow(cfg).step(phi)


def test_flow_to_matches_evolve(smooth_field, cfg):
    assert dynamics.flow_to(smooth_field, cfg) == bo.evolve(smooth_field, cfg).final


def test_reference_flow_runs_backward_for_negative_times(smooth_field):
    back = bo.reference_flow(smooth_field, -0.05, 16)
    cfg = bo.FlowConfig(16, 0.25, dt=dynamics.reference_dt(16), t_end=0.05)

    assert back == dynamics.flow_to(smooth_field, cfg, bo.Direction.BACKWARD)
