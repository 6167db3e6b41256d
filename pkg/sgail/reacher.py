"""Planar two-link reacher.

Joint dynamics are a gravity-free damped double integrator per joint, integrated with
semi-implicit Euler. The state is (sin θ1, cos θ1, sin θ2, cos θ2, θ̇1, θ̇2) with θ2
the angle of link 2 relative to link 1.

"""
from dataclasses import dataclass

import numpy as np

from .approximator import NonFiniteError
from .task import TaskVariable

__all__ = ["ReacherWorld", "reacher_step", "tip_position", "make_state", "joint_angles",
           "inverse_kinematics", "wrap_angle"]

Radians = float
Meters = float


@dataclass(frozen=True)
class ReacherWorld:
    """A two-link arm anchored at the origin and one target point per task.

    Parameters
    ----------
    link_lengths - (L1, L2) in meters.
    dt - Integration step in seconds.
    torque_limit - Torques are clamped to +- this value.
    damping - Viscous damping rate c, in 1/s.
    inertia - Joint inertia I.
    velocity_limit - Joint speeds are clamped to +- this value, rad/s.
    targets - Target point per task. Defaults to (0.7R, 0.7R) and (-0.7R, -0.7R), R = L1 + L2.
    success_radius - Tip-to-target distance counted as success. Defaults to 0.05R.
    horizon - Maximum number of steps per episode.
    initial_theta1 - Range of the uniform initial θ1; θ2 starts at 0.

    """

    link_lengths: tuple[Meters, Meters] = (0.1, 0.11)
    dt: float = 0.02
    torque_limit: float = 1.0
    damping: float = 0.1
    inertia: float = 1.0
    velocity_limit: float = 10.0
    targets: tuple[tuple[Meters, Meters], ...] | None = None
    success_radius: Meters | None = None
    horizon: int = 200
    initial_theta1: tuple[Radians, Radians] = (-3.0, 1.3)

    def __post_init__(self):
        reach = self.reach
        if self.targets is None:
            object.__setattr__(self, "targets", ((0.7 * reach, 0.7 * reach), (-0.7 * reach, -0.7 * reach)))
        if self.success_radius is None:
            object.__setattr__(self, "success_radius", 0.05 * reach)
        object.__setattr__(self, "targets", tuple((float(x), float(y)) for x, y in self.targets))
        if min(self.link_lengths) <= 0 or self.dt <= 0 or self.torque_limit <= 0 or self.inertia <= 0:
            raise ValueError("Link lengths, dt, torque limit and inertia must be positive")
        if self.success_radius <= 0 or self.horizon < 0:
            raise ValueError("Success radius must be positive and horizon non-negative")
        for target in self.targets:
            if np.hypot(*target) > reach:
                raise ValueError(f"Target {target} is out of reach {reach}")

    @classmethod
    def default(cls, horizon: int | None = None) -> "ReacherWorld":
        """The arm of the reacher experiments, optionally with another horizon."""
        return cls() if horizon is None else cls(horizon=horizon)

    @property
    def reach(self) -> Meters:
        return float(sum(self.link_lengths))

    def target(self, task: TaskVariable) -> np.ndarray:
        return np.asarray(self.targets[task.index])

    def distance_to_target(self, state: np.ndarray, task: TaskVariable) -> Meters:
        return float(np.linalg.norm(tip_position(state, self) - self.target(task)))


def make_state(theta: np.ndarray, theta_dot: np.ndarray = (0.0, 0.0)) -> np.ndarray:
    theta1, theta2 = theta
    return np.array([np.sin(theta1), np.cos(theta1), np.sin(theta2), np.cos(theta2), *theta_dot],
                    dtype=np.float64)


def joint_angles(state: np.ndarray) -> np.ndarray:
    """(θ1, θ2) in (-π, π]."""
    return np.arctan2(state[[0, 2]], state[[1, 3]])


def wrap_angle(angle):
    return (np.asarray(angle) + np.pi) % (2 * np.pi) - np.pi


def reacher_step(world: ReacherWorld, s: np.ndarray, torque: np.ndarray) -> np.ndarray:
    """Advance the arm by one time step.

    Raises
    ------
    NonFiniteError if the state or torque contains NaN or infinities.

    """
    s = np.asarray(s, dtype=np.float64)
    torque = np.asarray(torque, dtype=np.float64)
    if s.shape != (6,) or torque.shape != (2,):
        raise ValueError(f"Expected a 6-dim state and a 2-dim torque, got {s.shape} and {torque.shape}")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(torque))):
        raise NonFiniteError("Reacher state and torque must be finite")
    torque = np.clip(torque, -world.torque_limit, world.torque_limit)
    theta_dot = (1.0 - world.damping * world.dt) * s[4:] + world.dt * torque / world.inertia
    theta_dot = np.clip(theta_dot, -world.velocity_limit, world.velocity_limit)
    theta = joint_angles(s) + world.dt * theta_dot
    return make_state(theta, theta_dot)


def tip_position(s: np.ndarray, world: ReacherWorld) -> np.ndarray:
    """Forward kinematics of the arm tip.

    Examples
    --------
    >>> world = ReacherWorld()
    >>> tip_position(make_state((0.0, 0.0)), world)
    array([0.21, 0.  ])

    """
    l1, l2 = world.link_lengths
    sin1, cos1, sin2, cos2 = s[0], s[1], s[2], s[3]
    cos12 = cos1 * cos2 - sin1 * sin2
    sin12 = sin1 * cos2 + cos1 * sin2
    return np.array([l1 * cos1 + l2 * cos12, l1 * sin1 + l2 * sin12])


def inverse_kinematics(world: ReacherWorld, point: np.ndarray) -> list[np.ndarray]:
    """Both (elbow-down, elbow-up) joint solutions placing the tip at a point.

    Raises
    ------
    ValueError for points outside the annulus the arm can reach.

    """
    l1, l2 = world.link_lengths
    x, y = point
    cos2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if not -1.0 - 1e-12 <= cos2 <= 1.0 + 1e-12:
        raise ValueError(f"Point {tuple(point)} is unreachable")
    cos2 = float(np.clip(cos2, -1.0, 1.0))
    solutions = []
    for theta2 in (np.arccos(cos2), -np.arccos(cos2)):
        theta1 = np.arctan2(y, x) - np.arctan2(l2 * np.sin(theta2), l1 + l2 * np.cos(theta2))
        solutions.append(wrap_angle(np.array([theta1, theta2])))
    return solutions
