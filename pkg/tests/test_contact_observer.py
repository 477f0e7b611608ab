import numpy as np
import pytest

from lib.contact_observer import (
	ContactDetectionConfig,
	ContactEstimator,
	ObserverState,
	ObserverTerms,
	detect_contacts,
	gm_observer_step,
	k1,
	k2,
	mixed_observer_step,
	observer_terms,
	q_function,
)
from lib.robot_model import JointState, body_gravity, gravity_torque

TRUE_FORCE = 40.0


def _rig_terms(momentum: float = 0.0, bias: float = -TRUE_FORCE) -> ObserverTerms:
	"""1-DoF rig: unit force direction, bias balancing a constant contact force so p stays put"""
	return ObserverTerms(momentum=[[momentum]], bias=[[bias]], direction=[[1.0]])


def _run_rig(step, dt: float, duration: float) -> np.ndarray:
	state = ObserverState.zeros(legs=1, dof=1)
	terms = _rig_terms()
	forces = []
	for _ in range(int(round(duration / dt))):
		state = step(state, terms, dt)
		forces.append(state.force[0])
	return np.array(forces)


def _settling_time(forces: np.ndarray, dt: float, band: float) -> float:
	outside = np.flatnonzero(np.abs(forces - TRUE_FORCE) > band * TRUE_FORCE)
	return 0.0 if len(outside) == 0 else (outside[-1] + 1) * dt


def test_balanced_state_is_unchanged():
	state = ObserverState.zeros(legs=1, dof=1)
	terms = ObserverTerms(momentum=[[0.0]], bias=[[0.0]], direction=[[1.0]])
	for step in (gm_observer_step, mixed_observer_step):
		result = step(state, terms, 0.002)
		np.testing.assert_array_equal(result.momentum, state.momentum)
		np.testing.assert_array_equal(result.force, state.force)


def test_force_estimate_is_clipped_at_zero():
	# error of -1 with L2 = 2500 and dt = 2 ms would give -5 N
	state = ObserverState.zeros(legs=1, dof=1)
	result = gm_observer_step(state, _rig_terms(momentum=-1.0, bias=0.0), 0.002)
	assert result.force[0] == 0.0


def test_gm_correction_is_linear_in_the_error():
	state = ObserverState(np.zeros((1, 1)), np.array([100.0]))

	def _correction(error):
		result = gm_observer_step(state, _rig_terms(momentum=error, bias=0.0), 0.002)
		reference = gm_observer_step(state, _rig_terms(momentum=0.0, bias=0.0), 0.002)
		return result.momentum - reference.momentum, result.force - reference.force

	momentum_single, force_single = _correction(0.1)
	momentum_double, force_double = _correction(0.2)
	np.testing.assert_allclose(momentum_double, 2.0 * momentum_single, rtol=1e-12)
	np.testing.assert_allclose(force_double, 2.0 * force_single, rtol=1e-12)


def test_mixed_mode_functions():
	assert q_function(0.0) == 0.0
	assert k1(0.0) == 0.0
	assert k2(0.0) == 0.0
	assert k1(1.0) == pytest.approx(2.0)
	assert k2(1.0) == pytest.approx(3.0)
	s = np.linspace(0.01, 5.0, 50)
	np.testing.assert_allclose(k1(-s), -k1(s))
	np.testing.assert_allclose(q_function(-s), -q_function(s))


def test_mixed_correction_is_elementwise_on_off_axis_errors():
	state = ObserverState.zeros(legs=1, dof=3)
	terms = ObserverTerms(momentum=[[0.04, 0.0, -0.09]], bias=[[0.0, 0.0, 0.0]], direction=[[0.0, 0.0, 1.0]])
	result = mixed_observer_step(state, terms, 1e-3)
	rate = (result.momentum - state.momentum) / 1e-3
	# L k1(e) with L = 50: k1(0.04) = 0.24, k1(-0.09) = -0.39
	np.testing.assert_allclose(rate, [[12.0, 0.0, -19.5]], rtol=1e-9)
	# force follows k2 of the projected error only
	assert result.force[0] == 0.0

	along_x = ObserverTerms(momentum=[[0.04, 0.0, 0.0]], bias=[[0.0, 0.0, 0.0]], direction=[[0.0, 0.0, 1.0]])
	moved = mixed_observer_step(state, along_x, 1e-3)
	np.testing.assert_allclose(moved.momentum, [[0.012, 0.0, 0.0]], rtol=1e-9)
	assert moved.force[0] == 0.0


@pytest.mark.parametrize("step, dt", [(gm_observer_step, 0.002), (mixed_observer_step, 1e-4)])
def test_constant_force_steady_state(step, dt):
	forces = _run_rig(step, dt, 1.0)
	assert forces[-1] == pytest.approx(TRUE_FORCE, rel=0.02)
	assert np.all(forces >= 0.0)


def test_mixed_observer_settles_faster():
	dt = 1e-4
	gm = _settling_time(_run_rig(gm_observer_step, dt, 1.0), dt, 0.05)
	mixed = _settling_time(_run_rig(mixed_observer_step, dt, 1.0), dt, 0.05)
	assert mixed < gm


def test_observer_rejects_bad_dt():
	state = ObserverState.zeros(legs=1, dof=1)
	with pytest.raises(ValueError):
		gm_observer_step(state, _rig_terms(), 0.0)
	with pytest.raises(ValueError):
		mixed_observer_step(state, _rig_terms(), 0.5)


def test_observer_rejects_non_positive_gains():
	with pytest.raises(ValueError):
		ObserverState.zeros(l1=0.0)


def _detection() -> ContactDetectionConfig:
	return ContactDetectionConfig(upper=np.full(4, 40.0), lower=np.full(4, 25.0), cutoff_hz=10.0)


def test_forces_above_upper_threshold_are_contacts():
	report = detect_contacts(None, [50.0, 45.0, 41.0, 60.0], _detection(), 0.0)
	assert report.flags.all()
	assert report.count == 4


def test_hysteresis_keeps_contact_between_bands():
	config = _detection()
	report = detect_contacts(None, np.full(4, 50.0), config, 0.0)
	for k in range(1, 200):
		report = detect_contacts(report, np.full(4, 30.0), config, k * 0.002)
		assert report.flags.all()
	assert report.filtered[0] == pytest.approx(30.0, abs=0.1)


def test_monotone_force_switches_at_most_once():
	config = _detection()
	report = None
	flags = []
	for k, force in enumerate(np.linspace(0.0, 80.0, 400)):
		report = detect_contacts(report, np.full(4, force), config, k * 0.002)
		flags.append(report.flags[0])
	assert np.count_nonzero(np.diff(np.array(flags, dtype=int))) == 1


def test_detection_needs_increasing_stamps():
	config = _detection()
	report = detect_contacts(None, np.zeros(4), config, 1.0)
	with pytest.raises(ValueError):
		detect_contacts(report, np.zeros(4), config, 1.0)


def test_thresholds_scale_with_static_load(model):
	config = ContactDetectionConfig.for_model(model)
	np.testing.assert_allclose(config.upper, 0.4 * model.weight() / 4)
	np.testing.assert_allclose(config.lower, 0.25 * model.weight() / 4)
	with pytest.raises(ValueError):
		ContactDetectionConfig(upper=np.full(4, 10.0), lower=np.full(4, 20.0))


def _static_stance(model, force: float) -> JointState:
	"""standing still with torques that hold `force` on every foot"""
	orientation = [0.0, 0.0, 0.0, 1.0]
	q = np.array([[0.0, 0.5, -1.0]] * 4) * model.joint_signs
	idle = JointState(q, np.zeros((4, 3)))
	direction = observer_terms(model, idle, orientation).direction
	gravity = body_gravity(model, orientation)
	torques = np.array([gravity_torque(model, leg, q[leg], gravity) for leg in range(4)]) - force * direction
	return JointState(q, np.zeros((4, 3)), torques)


def test_observer_terms_balance_static_stance(model):
	state = _static_stance(model, 30.0)
	terms = observer_terms(model, state, [0.0, 0.0, 0.0, 1.0])
	np.testing.assert_allclose(terms.bias + 30.0 * terms.direction, 0.0, atol=1e-9)


@pytest.mark.parametrize("observer", ["gm", "mixed"])
def test_estimator_detects_standing_feet(model, observer):
	load = model.weight() / 4
	stance = _static_stance(model, load)
	estimator = ContactEstimator(model, ContactDetectionConfig.for_model(model), observer)
	for k in range(500):
		report = estimator.update(
			JointState(stance.positions, stance.velocities, stance.torques, stamp=k * 0.002), [0.0, 0.0, 0.0, 1.0]
		)
	assert report.flags.all()
	if observer == "gm":
		np.testing.assert_allclose(report.filtered, load, rtol=0.02)


def test_estimator_rejects_unknown_observer(model):
	with pytest.raises(ValueError):
		ContactEstimator(model, ContactDetectionConfig.for_model(model), "kalman")


@pytest.mark.slow
def test_trot_contact_f1_score(json_dir):
	from lib.pipeline import Scenario, contact_trace
	from schema import scenario_config

	config = scenario_config.Model(name="trot", world="synthetic-warehouse")
	scenario = Scenario.from_config(config, json_dir)
	samples = contact_trace(scenario, seed=0, duration=6.0, command=(0.4, 0.0, 0.0))
	# skip the observer start-up transient
	samples = samples[len(samples) // 6:]
	estimated = np.array([report.flags for _, report, _, _ in samples])
	truth = np.array([flags for _, _, _, flags in samples], dtype=bool)
	for leg in range(4):
		true_positive = np.count_nonzero(estimated[:, leg] & truth[:, leg])
		precision = true_positive / max(1, np.count_nonzero(estimated[:, leg]))
		recall = true_positive / max(1, np.count_nonzero(truth[:, leg]))
		assert 2 * precision * recall / (precision + recall) >= 0.95
