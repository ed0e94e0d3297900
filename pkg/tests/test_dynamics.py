import math

import numpy as np
import pytest

from decoupler import analytic, dynamics, sequences
from decoupler.bath import BathTrajectory, sample_trajectory
from decoupler.dynamics import IDEAL_PULSES, BlochVector, DensityMatrix, PulseErrorModel
from decoupler.errors import GridMismatchError


def zero_field(seq):
    return BathTrajectory(times=seq.edges, values=np.zeros(seq.n + 2), integrals=np.zeros(seq.n + 1))


def fidelity(r, target):
    return dynamics.state_fidelity(DensityMatrix.from_bloch(r.as_array()), target)


def test_named_states_and_kets():
    r = BlochVector.named('y')
    rho = DensityMatrix.pure(r.ket())
    np.testing.assert_allclose(rho.bloch().as_array(), [0.0, 1.0, 0.0], atol=1e-12)
    with pytest.raises(ValueError):
        BlochVector(1.0, 1.0, 0.0)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[1.5, 0], [0, -0.5]]))


def test_pulse_error_bounds():
    with pytest.raises(ValueError):
        PulseErrorModel(angle_error_x=0.5)
    with pytest.raises(ValueError):
        PulseErrorModel(axis_tilt_y=math.pi / 4)
    assert IDEAL_PULSES.is_ideal


def test_error_assignment_follows_axis():
    err = PulseErrorModel(angle_error_x=0.1, angle_error_y=-0.1, axis_tilt_y=0.05)
    assert err.actual_rotation(sequences.Pulse(1.0, axis=math.pi)) == pytest.approx((math.pi, 1.1 * math.pi))
    assert err.actual_rotation(sequences.Pulse(1.0, axis=math.pi / 2)) == pytest.approx((math.pi / 2 + 0.05, 0.9 * math.pi))


def test_accumulated_phase_of_constant_field():
    grid = np.linspace(0.0, 2.0, 21)
    traj = BathTrajectory(times=grid, values=np.full(grid.size, 0.7))
    assert dynamics.accumulate_phase(traj, sequences.ramsey(2.0)) == pytest.approx(1.4)
    assert dynamics.accumulate_phase(traj, sequences.spin_echo(2.0)) == pytest.approx(0.0, abs=1e-12)


def test_phase_needs_pulse_times_on_the_grid(nv1):
    traj = sample_trajectory(nv1, np.linspace(0.0, 1.0, 4), seed=0)
    with pytest.raises(GridMismatchError):
        dynamics.accumulate_phase(traj, sequences.cpmg(2, 1.0))


def test_propagation_matches_matrix_product(nv1):
    seq = sequences.xy(4, 2.0)
    err = PulseErrorModel(angle_error_x=0.03, angle_error_y=-0.02, axis_tilt_x=0.01)
    traj = sample_trajectory(nv1, seq.edges, seed=5)
    r = dynamics.propagate(traj, seq, err, 'x')
    u = dynamics.sequence_unitary(seq, err, traj.integrals)
    rho = DensityMatrix.from_bloch([1.0, 0.0, 0.0]).matrix
    out = DensityMatrix(u @ rho @ u.conj().T)
    np.testing.assert_allclose(r.as_array(), out.bloch().as_array(), atol=1e-12)


def test_ideal_target_flips_y_under_x_pulses():
    np.testing.assert_allclose(dynamics.ideal_final_state(sequences.cpmg(1, 1.0), 'y').as_array(), [0, -1, 0], atol=1e-12)
    np.testing.assert_allclose(dynamics.ideal_final_state(sequences.cpmg(2, 1.0), 'y').as_array(), [0, 1, 0], atol=1e-12)


def test_single_axis_errors_spare_only_the_pulse_axis():
    err = PulseErrorModel(angle_error_x=0.02, angle_error_y=0.02)
    cpmg = sequences.cpmg(12, 3.0)
    xy = sequences.xy(12, 3.0)

    def final_fidelity(seq, label):
        r = dynamics.propagate(zero_field(seq), seq, err, label)
        return fidelity(r, dynamics.ideal_final_state(seq, label))

    x_deficit = 1 - final_fidelity(cpmg, 'x')
    y_fidelity = final_fidelity(cpmg, 'y')
    assert x_deficit < 1e-12
    assert y_fidelity == pytest.approx((1 + math.cos(12 * 0.02 * math.pi)) / 2, abs=1e-9)
    assert final_fidelity(xy, 'x') > 0.99
    assert final_fidelity(xy, 'y') > 0.99


def test_state_fidelity():
    rho = DensityMatrix.from_bloch([0.0, 0.0, 0.0])
    assert dynamics.state_fidelity(rho, np.array([1.0, 0.0])) == pytest.approx(0.5)
    assert dynamics.state_fidelity(DensityMatrix.from_bloch([0, 0, 1]), BlochVector.named('0')) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        dynamics.state_fidelity(rho, np.array([1.0, 1.0]))


def test_monte_carlo_coherence_matches_gaussian_exponent(nv1):
    for seq in (sequences.spin_echo(2.85), sequences.cpmg(4, 6.0), sequences.udd(3, 4.0)):
        result = dynamics.coherence(nv1, seq, 20_000, seed=3, block_size=4096)
        expected = analytic.predicted_coherence(seq, nv1)
        assert abs(result.mean - expected) < 3 * result.std_error + 1e-3
        assert result.n_trajectories == 20_000


def test_monte_carlo_ramsey_follows_gaussian_decay(nv1):
    for t in (0.1, 0.3, 0.5):
        result = dynamics.coherence(nv1, sequences.ramsey(t), 20_000, seed=1)
        expected = analytic.predicted_coherence(sequences.ramsey(t), nv1)
        assert abs(result.mean - expected) < 3 * result.std_error + 1e-3


def test_exact_and_fine_grid_sampling_agree(nv1):
    seq = sequences.spin_echo(2.85)
    exact = dynamics.coherence(nv1, seq, 4000, seed=8)
    trapezoid = dynamics.coherence(nv1, seq, 4000, seed=9, exact_integrals=False, fine_step=0.01)
    combined = math.hypot(exact.std_error, trapezoid.std_error)
    assert abs(exact.mean - trapezoid.mean) < 3 * combined + 1e-3


def test_ensemble_is_thread_count_invariant(nv1):
    seq = sequences.cpmg(4, 5.0)
    one = dynamics.coherence(nv1, seq, 5000, seed=21, block_size=700, threads=1)
    many = dynamics.coherence(nv1, seq, 5000, seed=21, block_size=700, threads=4)
    assert one == many


def test_coherence_needs_two_trajectories(nv1):
    with pytest.raises(ValueError):
        dynamics.coherence(nv1, sequences.spin_echo(1.0), 1, seed=0)


def test_ensemble_state_fidelity_tracks_coherence(nv1):
    seq = sequences.cpmg(4, 6.0)
    state = dynamics.ensemble_state(nv1, seq, IDEAL_PULSES, 'x', 20_000, seed=4)
    expected = float(dynamics.fidelity_from_coherence(analytic.predicted_coherence(seq, nv1)))
    assert abs(state.fidelity.mean - expected) < 3 * state.fidelity.std_error + 1e-3
    assert abs(state.bloch[2].mean) < 1e-12
    assert dynamics.state_fidelity(state.rho, state.ideal) == pytest.approx(state.fidelity.mean, abs=1e-9)


def test_state_fidelity_curve_points_use_separate_streams(nv1):
    times = [1.0, 2.0, 3.0]
    values, errors = dynamics.state_fidelity_curve(
        nv1, lambda t: sequences.xy(4, t), times, IDEAL_PULSES, 'y', 2000, seed=2
    )
    assert values.shape == errors.shape == (3,)
    assert np.all(values <= 1.0) and np.all(values > 0.5)
    assert np.all(errors >= 0)


def test_ramsey_signal_beats_with_hyperfine_lines(nv1):
    assert float(dynamics.ramsey_signal(nv1, 1.0, 2.0, 0.0)) == pytest.approx(1.0)
    t = np.linspace(0.0, 1.0, 11)
    assert np.all(np.abs(dynamics.ramsey_signal(nv1, 94.25, 13.6, t)) <= np.exp(-0.5 * (3.6 * t) ** 2) + 1e-12)


def test_single_trajectory_keeps_bloch_vector_on_sphere(nv1):
    seq = sequences.xy(16, 6.0, start_axis='y')
    err = PulseErrorModel(angle_error_x=0.08, angle_error_y=-0.05, axis_tilt_x=0.04, axis_tilt_y=-0.02)
    traj = sample_trajectory(nv1, seq.edges, seed=31)
    for label in ('x', 'y', 'z'):
        assert dynamics.propagate(traj, seq, err, label).norm() == pytest.approx(1.0, abs=1e-9)
