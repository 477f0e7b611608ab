# per-run report: <run>/metrics.json, ablation report: <out>/ablation.json

from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class GoalResult(BaseModel):
    goal: List[float] = Field(min_length=3, max_length=3)
    reached: bool
    elapsed: float = Field(ge=0)
    position_error: Optional[float] = Field(default=None, ge=0)
    heading_error: Optional[float] = Field(default=None, ge=0)
    reason: Optional[str] = None


class Model(BaseModel):
    command: Literal["map", "navigate", "explore"] = "map"
    world: str
    variant: str
    seed: int
    status: Literal["ok", "failed"] = "ok"
    ate: Optional[float] = Field(default=None, ge=0)
    are: Optional[float] = Field(default=None, ge=0)
    ape: Optional[float] = Field(default=None, ge=0)
    rpe: Dict[str, Optional[float]] = {}
    rotation_weight: float = Field(default=1.0, ge=0)
    coverage: Optional[float] = Field(default=None, ge=0, le=1)
    keyframes: int = Field(default=0, ge=0)
    loop_closures: int = Field(default=0, ge=0)
    rejected_matches: int = Field(default=0, ge=0)
    vio_losses: int = Field(default=0, ge=0)
    recoveries: int = Field(default=0, ge=0)
    goals: List[GoalResult] = []
    success_rate: Optional[float] = Field(default=None, ge=0, le=1)
    error: Optional[str] = None


class AggregateRow(BaseModel):
    world: str
    variant: str
    metric: str
    mean: float = Field(ge=0)
    std: float = Field(ge=0)
    runs: int = Field(ge=1)


class AblationReport(BaseModel):
    rotation_weight: float = Field(default=1.0, ge=0)
    runs: List[Model] = []
    aggregate: List[AggregateRow] = []


def from_data(json_data) -> Model:
    import json
    data = json_data
    if isinstance(json_data, str):
        data = json.loads(data)
    return Model.model_validate(data)


def from_file(path: str) -> Model:
    with open(path, encoding="utf-8") as file:
        return from_data(file.read())


def ablation_from_data(json_data) -> AblationReport:
    import json
    data = json_data
    if isinstance(json_data, str):
        data = json.loads(data)
    return AblationReport.model_validate(data)
