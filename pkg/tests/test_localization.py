import numpy as np
import pytest

from lib.geometry import Pose2
from lib.localization import LocalizationConfig, ParticleFilter, localize
from lib.occupancy_grid import OccupancyGrid
from lib.scan_stabilization import StabilizedScan
from lib.worlds import room_world

ANGLES = np.linspace(-np.pi, np.pi, 180, endpoint=False)
NOISELESS = LocalizationConfig(
	particles=50,
	alpha_rotation_from_rotation=0.0,
	alpha_rotation_from_translation=0.0,
	alpha_translation_from_translation=0.0,
	alpha_translation_from_rotation=0.0,
	initial_sigma_xy=0.0,
	initial_sigma_theta=0.0,
)


@pytest.fixture(scope="module")
def room_grid():
	return room_world().ground_truth_grid()


def _scan(grid, pose: Pose2, stamp: float = 0.0) -> StabilizedScan:
	ranges, valid = grid.raycast(pose, ANGLES, 6.0)
	return StabilizedScan(ANGLES, ranges, valid, stamp=stamp, max_range=6.0)


def test_tracks_a_known_start(room_grid):
	truths = [Pose2(0.8 + 0.04 * k, 1.0 + 0.01 * k, 0.03 * k) for k in range(25)]
	scans = [_scan(room_grid, pose, 0.1 * k) for k, pose in enumerate(truths)]
	estimates = localize(room_grid, scans, truths, seed=3, initial_pose=truths[0])
	assert len(estimates) == len(truths)
	assert estimates[-1].pose.distance_to(truths[-1]) < 0.1
	assert abs(estimates[-1].pose.theta - truths[-1].theta) < 0.1
	assert not any(estimate.degraded for estimate in estimates)
	assert estimates[-1].fit > 0.5


def test_motion_model_without_noise_composes_the_odometry(room_grid):
	start = Pose2(1.0, 1.0, np.pi / 2)
	particle_filter = ParticleFilter(room_grid, NOISELESS, initial_pose=start)
	previous, current = Pose2(0.0, 0.0, 0.0), Pose2(0.3, 0.1, 0.4)
	particle_filter.predict(previous, current)
	expected = start.compose(previous.between(current))
	np.testing.assert_allclose(particle_filter.particles, np.tile(expected.as_array(), (50, 1)), atol=1e-12)


def test_backward_motion_keeps_heading(room_grid):
	particle_filter = ParticleFilter(room_grid, NOISELESS, initial_pose=Pose2(1.0, 1.0, 0.0))
	particle_filter.predict(Pose2(), Pose2(-0.5, 0.0, 0.0))
	np.testing.assert_allclose(particle_filter.particles, np.tile([0.5, 1.0, 0.0], (50, 1)), atol=1e-12)


def test_global_reset_samples_free_cells(room_grid):
	particle_filter = ParticleFilter(room_grid, LocalizationConfig(particles=300), seed=1)
	assert room_grid.is_free(particle_filter.particles[:, :2]).all()
	assert particle_filter.effective_sample_size() == pytest.approx(300.0)


def test_lost_filter_reinitializes(room_grid):
	truth = Pose2(1.25, 1.25, 0.0)
	scans = [_scan(room_grid, truth, 0.1 * k) for k in range(8)]
	config = LocalizationConfig(particles=100)
	# a start hypothesis outside the walls sees nothing the map explains
	estimates = localize(room_grid, scans, [truth] * 8, config, seed=2, initial_pose=Pose2(-0.8, -0.8, 0.0))
	assert any(estimate.degraded for estimate in estimates)
	assert estimates[0].fit < config.depletion_fit


def test_resampling_resets_weights(room_grid):
	particle_filter = ParticleFilter(room_grid, LocalizationConfig(particles=100), seed=4)
	particle_filter.log_weights = np.log(np.linspace(1.0, 100.0, 100))
	particle_filter.resample()
	assert particle_filter.particles.shape == (100, 3)
	np.testing.assert_allclose(particle_filter.weights(), 0.01)


def test_empty_map_gives_degraded_estimates():
	grid = OccupancyGrid.centered(4.0)
	scan = StabilizedScan(ANGLES, np.ones(len(ANGLES)), np.ones(len(ANGLES), dtype=bool))
	estimates = localize(grid, [scan, scan], [Pose2(), Pose2(0.1, 0.0, 0.0)], LocalizationConfig(particles=20))
	assert all(estimate.degraded for estimate in estimates)
	assert all(estimate.fit == 0.0 for estimate in estimates)


def test_arguments_are_checked(room_grid):
	with pytest.raises(ValueError):
		localize(room_grid, [], [Pose2()])
	with pytest.raises(ValueError):
		ParticleFilter(room_grid, LocalizationConfig(particles=0))
