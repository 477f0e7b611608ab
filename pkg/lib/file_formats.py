"""
Run artifact persistence: TUM trajectories, PGM + YAML grid maps, g2o pose graphs and
per-stream CSV logs.
"""
import os

import numpy as np
import pandas
import yaml
from PIL import Image

from lib.evaluation import Trajectory
from lib.geometry import Pose2
from lib.occupancy_grid import OccupancyGrid
from lib.pose_graph import PoseGraph2D

PGM_OCCUPIED = 0
PGM_FREE = 254
PGM_UNKNOWN = 205
OCCUPIED_THRESH = 0.65
FREE_THRESH = 0.196


# ------- TUM trajectories -------
def write_tum(trajectory: Trajectory, path: str):
	"""one `stamp tx ty tz qx qy qz qw` line per pose"""
	with open(path, "w", encoding="utf-8", newline="\n") as file:
		for stamp, position, quaternion in zip(trajectory.stamps, trajectory.positions, trajectory.quaternions):
			values = " ".join(f"{value:.9f}" for value in (*position, *quaternion))
			file.write(f"{stamp:.6f} {values}\n")


def read_tum(path: str, frame_id: str = "map") -> Trajectory:
	if not os.path.isfile(path):
		raise FileNotFoundError(f"trajectory file not found: {path}")
	if os.path.getsize(path) == 0:
		return Trajectory(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 4)), frame_id)
	table = pandas.read_csv(path, sep=r"\s+", comment="#", header=None, dtype=float)
	if table.shape[1] != 8:
		raise Trajectory.Error(f"{path}: expected 8 columns, found {table.shape[1]}")
	values = table.to_numpy()
	return Trajectory(values[:, 0], values[:, 1:4], values[:, 4:8], frame_id)


# ------- grid maps -------
def map_image(grid: OccupancyGrid) -> np.ndarray:
	"""trinary 8-bit raster, first row is the top (largest y) of the map"""
	image = np.full((grid.height, grid.width), PGM_UNKNOWN, dtype=np.uint8)
	image[grid.free_mask()] = PGM_FREE
	image[grid.occupied_mask()] = PGM_OCCUPIED
	return np.flipud(image)


def write_map(grid: OccupancyGrid, directory: str, name: str = "map", anchor: Pose2 | None = None) -> tuple[str, str]:
	"""writes <name>.pgm and <name>.yaml, returns both paths; `anchor` is the world pose of the map frame"""
	os.makedirs(directory, exist_ok=True)
	image_path = os.path.join(directory, f"{name}.pgm")
	yaml_path = os.path.join(directory, f"{name}.yaml")
	Image.fromarray(map_image(grid)).save(image_path)
	metadata = {
		"image": f"{name}.pgm",
		"resolution": float(grid.resolution),
		"origin": [float(grid.origin.x), float(grid.origin.y), 0.0],
		"negate": 0,
		"occupied_thresh": OCCUPIED_THRESH,
		"free_thresh": FREE_THRESH,
	}
	if anchor is not None:
		metadata["anchor"] = [round(float(value), 9) for value in anchor.as_array()]
	with open(yaml_path, "w", encoding="utf-8") as file:
		yaml.safe_dump(metadata, file, sort_keys=False)
	return image_path, yaml_path


def read_map(yaml_path: str) -> OccupancyGrid:
	"""grid with occupied / free cells saturated and unknown cells at zero log-odds"""
	if not os.path.isfile(yaml_path):
		raise FileNotFoundError(f"map metadata not found: {yaml_path}")
	with open(yaml_path, encoding="utf-8") as file:
		metadata = yaml.safe_load(file)
	image_path = os.path.join(os.path.dirname(yaml_path), metadata["image"])
	with Image.open(image_path) as image:
		pixels = np.flipud(np.asarray(image.convert("L"), dtype=float))
	if metadata.get("negate", 0):
		pixels = 255.0 - pixels
	occupancy = (255.0 - pixels) / 255.0
	x, y = metadata["origin"][:2]
	grid = OccupancyGrid(pixels.shape[1], pixels.shape[0], float(metadata["resolution"]), Pose2(x, y, 0.0))
	grid.log_odds[occupancy > metadata.get("occupied_thresh", OCCUPIED_THRESH)] = grid.l_max
	grid.log_odds[occupancy < metadata.get("free_thresh", FREE_THRESH)] = grid.l_min
	grid.touch()
	return grid


def map_anchor(yaml_path: str) -> Pose2:
	"""world pose of the map frame, identity for maps written without one"""
	with open(yaml_path, encoding="utf-8") as file:
		metadata = yaml.safe_load(file)
	return Pose2(*metadata.get("anchor", [0.0, 0.0, 0.0]))


# ------- pose graphs -------
def _upper_triangle(information: np.ndarray) -> str:
	return " ".join(f"{information[i, j]:.9g}" for i in range(3) for j in range(i, 3))


def write_g2o(graph: PoseGraph2D, path: str):
	"""VERTEX_SE2 / EDGE_SE2 lines; prior-anchored nodes are marked FIX"""
	with open(path, "w", encoding="utf-8", newline="\n") as file:
		for node in graph.nodes:
			file.write(f"VERTEX_SE2 {node.index} {node.pose.x:.9f} {node.pose.y:.9f} {node.pose.theta:.9f}\n")
		for factor in graph.factors:
			if factor.second is None:
				file.write(f"FIX {factor.first}\n")
				continue
			m = factor.measurement
			file.write(
				f"EDGE_SE2 {factor.first} {factor.second} {m.x:.9f} {m.y:.9f} {m.theta:.9f} "
				f"{_upper_triangle(factor.information)}\n"
			)


# ------- stream logs -------
def write_scan_csv(scans, path: str):
	"""long format: one row per ray, invalid rays flagged with valid = 0"""
	rows = []
	for index, scan in enumerate(scans):
		for angle, value, valid in zip(scan.angles, scan.ranges, scan.valid):
			rows.append({
				"scan": index, "stamp": scan.stamp, "angle": angle, "range": value,
				"valid": int(valid), "degraded": scan.degraded,
			})
	columns = ["scan", "stamp", "angle", "range", "valid", "degraded"]
	pandas.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format="%.6f")


def write_twist_csv(samples, path: str):
	"""rows of (stamp, TwistEstimate)"""
	rows = [
		{
			"stamp": stamp,
			"vx": estimate.twist.linear[0], "vy": estimate.twist.linear[1], "vz": estimate.twist.linear[2],
			"wx": estimate.twist.angular[0], "wy": estimate.twist.angular[1], "wz": estimate.twist.angular[2],
			"residual": estimate.residual,
			"contacts": estimate.contact_count,
			"degraded": estimate.degraded,
		}
		for stamp, estimate in samples
	]
	columns = ["stamp", "vx", "vy", "vz", "wx", "wy", "wz", "residual", "contacts", "degraded"]
	pandas.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format="%.6f")


def write_contact_csv(samples, path: str, leg_names=("FL", "FR", "RL", "RR")):
	"""rows of (stamp, ContactReport, true forces or None, true flags or None), one column set per leg"""
	rows = []
	for stamp, report, true_forces, true_flags in samples:
		row = {"stamp": stamp}
		for leg, name in enumerate(leg_names):
			row[f"{name}_raw"] = report.raw[leg]
			row[f"{name}_force"] = report.filtered[leg]
			row[f"{name}_contact"] = int(report.flags[leg])
			if true_forces is not None:
				row[f"{name}_true_force"] = true_forces[leg]
			if true_flags is not None:
				row[f"{name}_true_contact"] = int(true_flags[leg])
		rows.append(row)
	pandas.DataFrame(rows).to_csv(path, index=False, float_format="%.6f")
