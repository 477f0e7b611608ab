# robot model document: json/robot_default.json

from __future__ import annotations

from typing import List

from pydantic import BaseModel, Field, field_validator, model_validator


class Leg(BaseModel):
    name: str
    hip_offset: List[float] = Field(min_length=3, max_length=3)
    upper_length: float = Field(gt=0)
    lower_length: float = Field(gt=0)
    upper_mass: float = Field(gt=0)
    lower_mass: float = Field(gt=0)
    joint_signs: List[int] = Field(default=[1, 1, 1], min_length=3, max_length=3)

    @field_validator("joint_signs")
    @classmethod
    def _unit_signs(cls, value):
        if any(sign not in (-1, 1) for sign in value):
            raise ValueError("joint signs must be +1 or -1")
        return value


class Model(BaseModel):
    name: str = "quadruped"
    body_mass: float = Field(gt=0)
    gravity: float = Field(default=9.81, gt=0)
    joint_armature: float = Field(default=2e-4, ge=0)
    legs: List[Leg] = Field(min_length=4, max_length=4)

    @model_validator(mode="after")
    def _distinct_hips(self):
        offsets = {tuple(round(v, 9) for v in leg.hip_offset) for leg in self.legs}
        if len(offsets) != len(self.legs):
            raise ValueError("hip offsets must be distinct per leg")
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
