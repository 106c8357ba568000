from typing import List

from marshmallow import (
    EXCLUDE,
    Schema,
    ValidationError,
    fields,
    post_load,
    pre_load,
    validate,
    validates_schema,
)

from .flag_utils import parse_range, parse_steps
from .problems import PROBLEMS, HeatProblemConfig, PartitionMode
from .stability import RegionKind

ORDERS = [2, 3, 4]


class RangeField(fields.Field):
    """``min:max`` string or a two item sequence, loaded as a (min, max) tuple."""

    def _deserialize(self, value, attr, data, **kwargs):
        try:
            if isinstance(value, str):
                return parse_range(value)
            low, high = (float(x) for x in value)
        except (TypeError, ValueError) as e:
            raise ValidationError(str(e)) from e
        if not low < high:
            raise ValidationError(f"Range minimum {low} must be below maximum {high}")
        return low, high


class StepListField(fields.Field):
    """Comma separated step counts or a list of integers."""

    def _deserialize(self, value, attr, data, **kwargs) -> List[int]:
        try:
            if isinstance(value, str):
                return parse_steps(value)
            return [int(x) for x in value]
        except (TypeError, ValueError) as e:
            raise ValidationError(f"Invalid step list: {value}") from e


class HeatProblemConfigSchema(Schema):
    class Meta:
        unknown = EXCLUDE

    dims = fields.Int(required=True, validate=validate.OneOf([2, 3]))
    n_points = fields.Int(required=True, validate=validate.Range(min=3))
    t_span = RangeField(load_default=(0.0, 1.0))
    partition_mode = fields.Str(
        load_default=PartitionMode.PER_DIRECTION.value,
        validate=validate.OneOf(PartitionMode.fetch_values()),
    )

    @validates_schema
    def validate_mode(self, data, **kwargs):
        if (
            data.get("dims") == 3
            and data.get("partition_mode") != PartitionMode.PER_DIRECTION.value
        ):
            raise ValidationError(
                "Only per-direction partitioning exists in 3D", "partition_mode"
            )

    @post_load
    def make_config(self, data, **kwargs) -> HeatProblemConfig:
        return HeatProblemConfig(
            dims=data["dims"],
            n_points=data["n_points"],
            t_span=tuple(data["t_span"]),
            partition_mode=PartitionMode(data["partition_mode"]),
        )


class OrderSchema(Schema):
    order = fields.Int(required=True, validate=validate.OneOf(ORDERS))


class ProblemRunSchema(OrderSchema):
    problem = fields.Str(required=True, validate=validate.OneOf(list(PROBLEMS)))
    n_points = fields.Int(required=True, validate=validate.Range(min=3))
    out = fields.Str(load_default=None)


class ConvergenceRequestSchema(ProblemRunSchema):
    steps = StepListField(required=True, validate=validate.Length(min=3))

    @validates_schema
    def validate_steps(self, data, **kwargs):
        steps = data.get("steps", [])
        if any(n < 1 for n in steps):
            raise ValidationError("Step counts must be positive", "steps")
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValidationError("Step counts must be strictly increasing", "steps")


class IntegrateRequestSchema(ProblemRunSchema):
    steps = fields.Int(required=True, validate=validate.Range(min=1))


class ScanRequestSchema(OrderSchema):
    kind = fields.Str(required=True, validate=validate.OneOf(RegionKind.fetch_values()))
    re = RangeField(required=True)
    im = RangeField(required=True)
    n = fields.Int(required=True, validate=validate.Range(min=1))
    partitions = fields.Int(load_default=3, validate=validate.OneOf([2, 3]))
    out = fields.Str(required=True)


class ConvergenceRowSchema(Schema):
    nsteps = fields.Int(required=True, validate=validate.Range(min=1))
    error = fields.Float(required=True, allow_nan=True)
    observed_order = fields.Float(allow_none=True, load_default=None, allow_nan=True)

    @pre_load
    def blank_to_none(self, data, **kwargs):
        return {key: (None if value == "" else value) for key, value in data.items()}
