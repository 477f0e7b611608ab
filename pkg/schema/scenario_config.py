# scenario document: json/warehouse.json, json/house.json, json/warehouse_jitter.json

from __future__ import annotations

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class Sim(BaseModel):
    control_rate: float = Field(default=500.0, gt=0)
    depth_rate: float = Field(default=30.0, gt=0)
    vio_correspondences: int = Field(default=120, ge=1)

    @model_validator(mode="after")
    def _depth_slower_than_control(self):
        if self.depth_rate > self.control_rate:
            raise ValueError("depth rate must not exceed the control rate")
        return self


class Gait(BaseModel):
    frequency: float = Field(default=1.25, gt=0)
    duty_factor: float = Field(default=0.575, gt=0, lt=1)
    step_length: float = Field(default=0.3, gt=0)
    step_height: float = Field(default=0.06, ge=0)
    body_height: float = Field(default=0.32, gt=0)
    roll_amplitude: float = Field(default=0.0, ge=0)
    pitch_amplitude: float = Field(default=0.0, ge=0)
    height_amplitude: float = Field(default=0.0, ge=0)
    max_linear: float = Field(default=0.6, gt=0)
    max_lateral: float = Field(default=0.3, ge=0)
    max_angular: float = Field(default=1.0, gt=0)


class Noise(BaseModel):
    encoder: float = Field(default=0.0, ge=0)
    joint_velocity: float = Field(default=0.0, ge=0)
    torque: float = Field(default=0.0, ge=0)
    gyro: float = Field(default=0.0, ge=0)
    accelerometer: float = Field(default=0.0, ge=0)
    attitude: float = Field(default=0.0, ge=0)
    depth: float = Field(default=0.0, ge=0)
    vio_drift_xy: float = Field(default=0.0, ge=0)
    vio_drift_yaw: float = Field(default=0.0, ge=0)


class ScanCorruption(BaseModel):
    start: float = Field(ge=0)
    end: float
    offset: List[float] = Field(min_length=3, max_length=3)


class Faults(BaseModel):
    dropouts: List[Tuple[float, float]] = []
    scan_corruptions: List[ScanCorruption] = []

    @model_validator(mode="after")
    def _ordered_windows(self):
        windows = list(self.dropouts) + [(c.start, c.end) for c in self.scan_corruptions]
        if any(start >= end for start, end in windows):
            raise ValueError("fault windows need start < end")
        return self


class Command(BaseModel):
    duration: float = Field(gt=0)
    linear: float = 0.0
    lateral: float = 0.0
    angular: float = 0.0


class Contact(BaseModel):
    source: Literal["ground_truth", "observer"] = "ground_truth"
    observer: Literal["gm", "mixed"] = "mixed"
    upper_factor: float = Field(default=0.4, gt=0)
    lower_factor: float = Field(default=0.25, gt=0)
    cutoff_hz: float = Field(default=10.0, gt=0)

    @model_validator(mode="after")
    def _hysteresis_band(self):
        if self.lower_factor >= self.upper_factor:
            raise ValueError("lower contact threshold must lie below the upper one")
        return self


class Scan(BaseModel):
    band: int = Field(default=2, ge=0)
    aggregation: Literal["min", "median"] = "min"


class Slam(BaseModel):
    keyframe_distance: float = Field(default=0.2, gt=0)
    keyframe_angle: float = Field(default=0.2, gt=0)
    loop_radius: float = Field(default=1.5, gt=0)
    loop_threshold: float = Field(default=0.6, gt=0, le=1)
    map_size: float = Field(default=40.0, gt=0)
    resolution: float = Field(default=0.05, gt=0)


class Navigation(BaseModel):
    map: Optional[str] = None
    position_tolerance: float = Field(default=0.25, gt=0)
    heading_tolerance: float = Field(default=0.25, gt=0)
    goal_timeout: float = Field(default=120.0, ge=0)
    particles: int = Field(default=500, ge=10)
    lookahead: float = Field(default=0.4, gt=0)
    inflation_radius: float = Field(default=0.25, ge=0)


class Exploration(BaseModel):
    timeout: float = Field(default=600.0, ge=0)
    min_frontier_size: int = Field(default=1, ge=1)
    stuck_window: float = Field(default=20.0, gt=0)
    replan_interval: float = Field(default=2.0, gt=0)


class Evaluation(BaseModel):
    rpe_distances: List[float] = Field(default=[2.0, 5.0, 10.0], min_length=1)
    rotation_weight: float = Field(default=1.0, ge=0)
    max_gap: float = Field(default=0.02, gt=0)
    align: bool = True


class Model(BaseModel):
    name: str
    world: Literal["synthetic-warehouse", "synthetic-house", "synthetic-room"]
    robot_model: str = "robot_default.json"
    variant: str = "Ours"
    seeds: List[int] = Field(default=[0], min_length=1)
    output: str = "runs"
    duration: Optional[float] = Field(default=None, ge=0)
    sim: Sim = Sim()
    gait: Gait = Gait()
    noise: Noise = Noise()
    faults: Faults = Faults()
    commands: List[Command] = []
    goals: Optional[List[List[float]]] = None
    contact: Contact = Contact()
    scan: Scan = Scan()
    slam: Slam = Slam()
    navigation: Navigation = Navigation()
    exploration: Exploration = Exploration()
    evaluation: Evaluation = Evaluation()

    @model_validator(mode="after")
    def _planar_goals(self):
        if self.goals is not None and any(len(goal) != 3 for goal in self.goals):
            raise ValueError("goals are [x, y, heading] triples")
        return self


def from_data(json_data) -> Model:
    import json
    data = json_data
    if isinstance(json_data, str):
        data = json.loads(data)
    return Model.model_validate(data)


def from_file(path: str) -> Model:
    with open(path, encoding="utf-8") as file:
        return from_data(file.read())
