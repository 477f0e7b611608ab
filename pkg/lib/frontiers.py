from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from lib.occupancy_grid import OccupancyGrid

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class FrontierCluster:
	cells: np.ndarray  # (n, 2) as (ix, iy)
	centroid: np.ndarray  # map frame, m
	target: np.ndarray  # member cell center closest to the centroid, m

	@property
	def size(self) -> int:
		return len(self.cells)


def frontier_mask(grid: OccupancyGrid) -> np.ndarray:
	"""free cells with at least one unknown 8-neighbour"""
	unknown = grid.unknown_mask()
	return grid.free_mask() & ndimage.binary_dilation(unknown, structure=EIGHT_CONNECTED)


def find_frontiers(grid: OccupancyGrid, min_size: int = 1) -> list[FrontierCluster]:
	"""8-connected frontier clusters, largest first; an empty list means exploration is complete"""
	labels, count = ndimage.label(frontier_mask(grid), structure=EIGHT_CONNECTED)
	clusters = []
	for label in range(1, count + 1):
		iy, ix = np.nonzero(labels == label)
		if len(ix) < min_size:
			continue
		centers = grid.cell_center(ix, iy)
		centroid = centers.mean(axis=0)
		target = centers[np.argmin(np.hypot(*(centers - centroid).T))]
		clusters.append(FrontierCluster(np.column_stack([ix, iy]), centroid, target))
	clusters.sort(key=lambda cluster: -cluster.size)
	return clusters


def nearest_frontier(
		clusters: list[FrontierCluster],
		position,
		excluded: list[np.ndarray] = (),
		exclusion_radius: float = 0.5,
) -> FrontierCluster | None:
	"""closest cluster target to `position`, skipping targets near an excluded point"""
	position = np.asarray(position, dtype=float)
	candidates = [
		cluster for cluster in clusters
		if all(np.hypot(*(cluster.target - point)) > exclusion_radius for point in excluded)
	]
	if not candidates:
		return None
	return min(candidates, key=lambda cluster: float(np.hypot(*(cluster.target - position))))
