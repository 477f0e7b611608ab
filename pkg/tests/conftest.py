import json
import os

import numpy as np
import pytest

from lib.robot_model import RobotModel

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
JSON_DIR = os.path.join(REPO_ROOT, "json")


@pytest.fixture(scope="session")
def json_dir() -> str:
	return JSON_DIR


@pytest.fixture(scope="session")
def model() -> RobotModel:
	return RobotModel.from_file(os.path.join(JSON_DIR, "robot_default.json"))


@pytest.fixture
def rng():
	return np.random.default_rng(7)


@pytest.fixture
def scenario_file(tmp_path):
	"""writes a short synthetic-room scenario, keyword updates replace top-level entries"""

	def _write(**updates) -> str:
		data = {
			"name": "room-smoke",
			"world": "synthetic-room",
			"robot_model": os.path.join(JSON_DIR, "robot_default.json"),
			"variant": "Ours",
			"seeds": [1],
			"output": str(tmp_path / "runs"),
			"sim": {"control_rate": 100.0, "depth_rate": 10.0},
			"commands": [
				{"duration": 1.0},
				{"duration": 3.0, "linear": 0.15, "angular": 0.2},
			],
			"slam": {"map_size": 8.0},
			"navigation": {"particles": 100, "goal_timeout": 30.0},
			"exploration": {"timeout": 20.0},
		}
		data.update(updates)
		path = tmp_path / f'{data["name"]}.json'
		path.write_text(json.dumps(data), encoding="utf-8")
		return str(path)

	return _write
