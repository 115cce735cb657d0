from .algorithms import (Kinematics, bias_and_gravity, frame_kinematics,
                         jdot_qdot, mass_matrix, point_jacobian, rnea)
from .model import (FloatingBaseState, Frame, Joint, Link, ModelError,
                    RobotModel, load_model, model_from_text)

__all__ = [
    "Kinematics", "bias_and_gravity", "frame_kinematics", "jdot_qdot",
    "mass_matrix", "point_jacobian", "rnea",
    "FloatingBaseState", "Frame", "Joint", "Link", "ModelError",
    "RobotModel", "load_model", "model_from_text",
]
