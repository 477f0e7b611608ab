import numpy as np
import pytest

from lib.frontiers import find_frontiers, frontier_mask, nearest_frontier
from lib.occupancy_grid import OccupancyGrid
from lib.worlds import room_world


def _half_known() -> OccupancyGrid:
	grid = OccupancyGrid.from_bounds(0.0, 0.0, 2.0, 1.0, 0.05)
	grid.log_odds[:, :20] = grid.l_min
	grid.touch()
	return grid


def test_frontier_is_the_free_boundary_column():
	mask = frontier_mask(_half_known())
	assert mask[:, 19].all()
	assert np.count_nonzero(mask) == 20


def test_frontier_cluster_geometry():
	clusters = find_frontiers(_half_known())
	assert len(clusters) == 1
	cluster = clusters[0]
	assert cluster.size == 20
	np.testing.assert_allclose(cluster.centroid, [0.975, 0.5], atol=1e-9)
	assert cluster.target[0] == pytest.approx(0.975)


def test_closed_map_has_no_frontiers():
	grid = room_world().ground_truth_grid(margin=0.0)
	grid.log_odds[grid.unknown_mask()] = grid.l_max
	assert find_frontiers(grid) == []


def test_small_clusters_are_dropped():
	grid = OccupancyGrid.from_bounds(0.0, 0.0, 1.0, 1.0, 0.05)
	grid.log_odds[:] = grid.l_min
	grid.log_odds[10, 10] = 0.0
	grid.touch()
	# the 8 free cells around one unknown cell form one cluster
	assert len(find_frontiers(grid, min_size=3)) == 1
	assert find_frontiers(grid, min_size=9) == []


def test_single_cell_frontier_is_kept_by_default():
	grid = OccupancyGrid.from_bounds(0.0, 0.0, 0.5, 0.5, 0.05)
	grid.log_odds[:] = grid.l_max
	grid.log_odds[5, 5] = grid.l_min
	grid.log_odds[5, 6] = 0.0
	grid.touch()
	clusters = find_frontiers(grid)
	assert len(clusters) == 1
	assert clusters[0].size == 1
	np.testing.assert_array_equal(clusters[0].cells, [[5, 5]])
	np.testing.assert_allclose(clusters[0].target, [0.275, 0.275], atol=1e-9)


def test_nearest_frontier_skips_excluded_targets():
	grid = OccupancyGrid.from_bounds(0.0, 0.0, 4.0, 1.0, 0.05)
	grid.log_odds[:, 10:70] = grid.l_min
	grid.touch()
	clusters = find_frontiers(grid)
	assert len(clusters) == 2
	left = nearest_frontier(clusters, [0.8, 0.5])
	assert left.target[0] < 1.0
	right = nearest_frontier(clusters, [0.8, 0.5], excluded=[left.target])
	assert right.target[0] > 3.0
	assert nearest_frontier(clusters, [0.8, 0.5], excluded=[c.target for c in clusters]) is None
