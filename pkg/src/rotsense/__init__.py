"""rotsense: rotational distance metrics, distance ratio constants, and
provable rotational sensitivity bounds for feedforward pose networks."""

from .errors import (
    ConvergenceFailureError,
    DegeneratePairError,
    InvalidArgumentError,
    MissingTensorError,
    ModelFormatError,
    NonFiniteWeightError,
    RotsenseError,
    ShapeMismatchError,
    UnboundedConstantError,
    UnknownLayerKindError,
    UnsupportedVersionError,
)
from .kernels import backend_name
from .rotations import (
    AxisAngle,
    ExpCoords,
    RawQuaternion,
    RotationMatrix,
    UnitQuaternion,
    axis_angle_to_quat,
    compose_angle,
    dist_exp,
    dist_matrices,
    dist_quat,
    dist_quat_from_angle,
    exp_to_matrix,
    normalize,
    pose_cost,
    quat_to_axis_angle,
    quat_to_exp,
    quat_to_matrix,
)

__version__ = "0.1.0"
