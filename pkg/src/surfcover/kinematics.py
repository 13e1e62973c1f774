"""Serial-chain kinematics with task tolerances.

Conventions: the tool's +z axis is its approach direction, so a tool that
sits exactly on a target has ``z_tool == -normal``.  When a full 6-DoF
target frame is needed, its x axis is the world x axis projected onto the
target tangent plane (world y when x is parallel to the normal).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .surface import EndEffectorTarget

__all__ = [
    "Joint",
    "KinematicChain",
    "Pose",
    "ToleranceSpec",
    "fk",
    "pose_error",
    "pose_error_batch",
    "solve_ik_rows",
    "solve_ik",
    "solve_ik_batch",
    "target_frame",
    "load_chain",
    "bundled_chain",
    "BUNDLED_ROBOTS",
    "POS_ACCURACY",
    "ROT_ACCURACY",
]

# IK acceptance thresholds (m, rad).
POS_ACCURACY = 1e-3
ROT_ACCURACY = 1e-2

BUNDLED_ROBOTS = ("arm6", "arm7", "planar2r", "planar3r")


def _transform(translation=(0.0, 0.0, 0.0), rotvec=(0.0, 0.0, 0.0)) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix()
    T[:3, 3] = translation
    return T


def _axis_rotations(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues rotation matrices, shape (B, 3, 3)."""
    x, y, z = axis
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    s = np.sin(angles)[:, None, None]
    c = np.cos(angles)[:, None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


@dataclass(frozen=True)
class Joint:
    offset: np.ndarray  # 4x4 fixed transform applied before the joint rotation
    axis: np.ndarray
    limits: Tuple[float, float]
    name: str = ""

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError(f"joint {self.name!r}: zero axis")
        lo, hi = (float(v) for v in self.limits)
        if not lo < hi:
            raise ValueError(f"joint {self.name!r}: limits must satisfy lo < hi")
        object.__setattr__(self, "axis", axis / norm)
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float).reshape(4, 4))
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True)
class KinematicChain:
    joints: Tuple[Joint, ...]
    base_transform: np.ndarray = np.eye(4)
    tool_transform: np.ndarray = np.eye(4)
    name: str = ""

    def __post_init__(self):
        if len(self.joints) < 1:
            raise ValueError("a chain needs at least one joint")
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "base_transform", np.asarray(self.base_transform, dtype=float).reshape(4, 4))
        object.__setattr__(self, "tool_transform", np.asarray(self.tool_transform, dtype=float).reshape(4, 4))

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    def diameter(self) -> float:
        """Largest L2 distance between two configurations within the limits."""
        return float(np.linalg.norm(self.upper - self.lower))

    def reach(self) -> float:
        """Upper bound on base-to-tool distance (sum of link offsets)."""
        total = sum(np.linalg.norm(j.offset[:3, 3]) for j in self.joints[1:])
        return float(total + np.linalg.norm(self.tool_transform[:3, 3]))

    def clip(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.lower, self.upper)

    def random_configs(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(count, self.dof))

    # -------------------------------------------------------------- batched

    def _check(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        squeeze = q.ndim == 1
        q2 = q.reshape(-1, q.shape[-1]) if q.ndim else q
        if q2.shape[-1] != self.dof:
            raise ValueError(f"expected {self.dof} joint values, got {q.shape[-1]}")
        return q2, squeeze

    def fk_batch(self, q) -> Tuple[np.ndarray, np.ndarray]:
        """Tool positions (B, 3) and rotation matrices (B, 3, 3)."""
        q, _ = self._check(q)
        B = len(q)
        T = np.broadcast_to(self.base_transform, (B, 4, 4)).copy()
        for k, joint in enumerate(self.joints):
            T = T @ joint.offset
            R = _axis_rotations(joint.axis, q[:, k])
            T[:, :3, :3] = T[:, :3, :3] @ R
        T = T @ self.tool_transform
        return T[:, :3, 3], T[:, :3, :3]

    def fk_jacobian_batch(self, q):
        """Positions, rotations and geometric Jacobians (B, 6, k)."""
        q, _ = self._check(q)
        B, k = q.shape
        T = np.broadcast_to(self.base_transform, (B, 4, 4)).copy()
        origins = np.empty((B, k, 3))
        axes = np.empty((B, k, 3))
        for idx, joint in enumerate(self.joints):
            T = T @ joint.offset
            origins[:, idx] = T[:, :3, 3]
            axes[:, idx] = T[:, :3, :3] @ joint.axis
            T[:, :3, :3] = T[:, :3, :3] @ _axis_rotations(joint.axis, q[:, idx])
        T = T @ self.tool_transform
        pos = T[:, :3, 3]
        J = np.empty((B, 6, k))
        J[:, :3, :] = np.cross(axes, pos[:, None, :] - origins).transpose(0, 2, 1)
        J[:, 3:, :] = axes.transpose(0, 2, 1)
        return pos, T[:, :3, :3], J


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion, scalar last (x, y, z, w)

    @property
    def rotation(self) -> np.ndarray:
        return Rotation.from_quat(self.orientation).as_matrix()

    @property
    def approach(self) -> np.ndarray:
        return self.rotation[:, 2]


@dataclass(frozen=True)
class ToleranceSpec:
    """Task slack around an end-effector target."""

    free_spin_about_normal: bool = False
    tilt_tolerance: float = 0.0
    tangent_translation_radius: float = 0.0
    full_6dof: bool = False

    def __post_init__(self):
        if self.tilt_tolerance < 0 or self.tangent_translation_radius < 0:
            raise ValueError("tolerances must be non-negative")
        if self.full_6dof and (
            self.free_spin_about_normal or self.tilt_tolerance > 0 or self.tangent_translation_radius > 0
        ):
            raise ValueError("full_6dof excludes every other tolerance")

    @property
    def rotation_all_tolerant(self) -> bool:
        # a tilt cone narrower than a half-turn still constrains the axis
        return self.free_spin_about_normal and self.tilt_tolerance >= math.pi

    @classmethod
    def preset(cls, name: str) -> "ToleranceSpec":
        presets = {
            "free-spin": cls(free_spin_about_normal=True),
            "wok": cls(free_spin_about_normal=True, tangent_translation_radius=0.01),
            "brush": cls(free_spin_about_normal=True, tilt_tolerance=0.2),
            "full-6dof": cls(full_6dof=True),
            "position-only": cls(free_spin_about_normal=True, tilt_tolerance=math.pi),
        }
        try:
            return presets[name]
        except KeyError:
            raise ValueError(f"unknown tolerance preset {name!r}; choose from {sorted(presets)}") from None


def fk(chain: KinematicChain, q) -> Pose:
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise ValueError(f"expected {chain.dof} joint values, got shape {q.shape}")
    pos, rot = chain.fk_batch(q[None])
    return Pose(pos[0].copy(), Rotation.from_matrix(rot[0]).as_quat())


def target_frame(normal: np.ndarray) -> np.ndarray:
    """Rotation matrix whose z axis is -normal (the desired tool frame)."""
    return _target_frames(np.asarray(normal, dtype=float)[None])[0]


def _target_frames(N: np.ndarray) -> np.ndarray:
    """Row-wise :func:`target_frame` for (B, 3) normals."""
    z = -N
    ref = np.tile(np.array([1.0, 0.0, 0.0]), (len(N), 1))
    ref[np.abs(z[:, 0]) > 0.99] = (0.0, 1.0, 0.0)
    x = ref - np.sum(ref * z, axis=1)[:, None] * z
    x /= np.linalg.norm(x, axis=1)[:, None]
    return np.stack([x, np.cross(z, x), z], axis=2)


def _swing_twist(R_rel: np.ndarray):
    """Swing rotation vectors (B, 3) and twist angles about z (B,)."""
    quat = Rotation.from_matrix(R_rel).as_quat()  # x, y, z, w
    w, vz = quat[:, 3], quat[:, 2]
    twist = 2.0 * np.arctan2(vz, w)
    twist = (twist + np.pi) % (2 * np.pi) - np.pi
    twist_q = np.zeros_like(quat)
    twist_q[:, 2] = np.sin(twist / 2)
    twist_q[:, 3] = np.cos(twist / 2)
    swing = Rotation.from_quat(quat) * Rotation.from_quat(twist_q).inv()
    return swing.as_rotvec(), twist


def _rowdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("bi,bi->b", a, b)


def _pose_error_rows(pos, rot, P, N, tol: ToleranceSpec):
    """Pose error with one target (row of P, N) per configuration."""
    r = pos - P
    if tol.tangent_translation_radius > 0:
        rn = _rowdot(r, N)
        tangential = np.linalg.norm(r - rn[:, None] * N, axis=1)
        excess = np.maximum(0.0, tangential - tol.tangent_translation_radius)
        pos_err = np.hypot(rn, excess)
    else:
        pos_err = np.linalg.norm(r, axis=1)

    if tol.rotation_all_tolerant:
        return pos_err, None
    z = rot[:, :, 2]
    if tol.full_6dof:
        R_rel = np.einsum("bji,bjk->bik", _target_frames(N), rot)
        cos = (np.trace(R_rel, axis1=1, axis2=2) - 1.0) / 2.0
        rot_err = np.arccos(np.clip(cos, -1.0, 1.0))
    elif tol.free_spin_about_normal:
        tilt = np.arccos(np.clip(-_rowdot(z, N), -1.0, 1.0))
        rot_err = np.maximum(0.0, tilt - tol.tilt_tolerance)
    else:
        R_rel = np.einsum("bji,bjk->bik", _target_frames(N), rot)
        swing, twist = _swing_twist(R_rel)
        swing_excess = np.maximum(0.0, np.linalg.norm(swing, axis=1) - tol.tilt_tolerance)
        rot_err = np.hypot(swing_excess, twist)
    return pos_err, rot_err


def pose_error_batch(pos: np.ndarray, rot: np.ndarray, target: EndEffectorTarget, tol: ToleranceSpec):
    """Vectorized pose_error over (B, 3) positions and (B, 3, 3) rotations.

    Returns ``(pos_err, rot_err)``; ``rot_err`` is None when every
    rotational DoF is tolerant.
    """
    B = len(pos)
    P = np.broadcast_to(target.position, (B, 3))
    N = np.broadcast_to(target.normal, (B, 3))
    return _pose_error_rows(pos, rot, P, N, tol)


def pose_error(pose: Pose, target: EndEffectorTarget, tol: ToleranceSpec):
    """Error in the constrained DoF only: ``(pos_err, rot_err or None)``."""
    pos_err, rot_err = pose_error_batch(pose.position[None], pose.rotation[None], target, tol)
    return float(pos_err[0]), (None if rot_err is None else float(rot_err[0]))


def _within(pos_err, rot_err, pos_acc, rot_acc) -> np.ndarray:
    ok = pos_err <= pos_acc
    if rot_err is not None:
        ok &= rot_err <= rot_acc
    return ok


def _task_error(pos, rot, Pt, N, tol):
    """Clamped task-space error (B, 6) and row projectors (B, 6, 6).

    Coordinates inside their tolerance interval are zero and their rows
    are projected out so they do not constrain the step.
    """
    B = len(pos)
    e = np.zeros((B, 6))
    P = np.zeros((B, 6, 6))
    eye = np.eye(3)

    r = pos - Pt
    if tol.tangent_translation_radius > 0:
        rn = _rowdot(r, N)[:, None] * N
        rt = r - rn
        rt_norm = np.linalg.norm(rt, axis=1)
        scale = np.maximum(0.0, 1.0 - tol.tangent_translation_radius / np.maximum(rt_norm, 1e-300))
        e[:, :3] = -(rn + rt * scale[:, None])
        inside = scale == 0.0
        P[:, :3, :3] = np.where(inside[:, None, None], np.einsum("bi,bj->bij", N, N), eye)
    else:
        e[:, :3] = -r
        P[:, :3, :3] = eye

    z = rot[:, :, 2]
    if tol.full_6dof:
        R_t = _target_frames(N)
        R_rel = np.einsum("bji,bjk->bik", R_t, rot)
        e[:, 3:] = -np.einsum("bij,bj->bi", R_t, Rotation.from_matrix(R_rel).as_rotvec())
        P[:, 3:, 3:] = eye
    elif tol.free_spin_about_normal:
        a = -N
        cross = np.cross(z, a)
        s = np.linalg.norm(cross, axis=1)
        tilt = np.arctan2(s, _rowdot(z, a))
        excess = np.maximum(0.0, tilt - tol.tilt_tolerance)
        fallback = np.cross(z, np.array([1.0, 0.0, 0.0]))
        axis = np.where(s[:, None] > 1e-12, cross / np.maximum(s, 1e-300)[:, None], fallback)
        e[:, 3:] = axis * excess[:, None]
        perp = eye - np.einsum("bi,bj->bij", z, z)
        P[:, 3:, 3:] = np.where((excess > 0)[:, None, None], perp, 0.0)
    else:
        R_t = _target_frames(N)
        R_rel = np.einsum("bji,bjk->bik", R_t, rot)
        swing, twist = _swing_twist(R_rel)
        sn = np.linalg.norm(swing, axis=1)
        scale = np.maximum(0.0, 1.0 - tol.tilt_tolerance / np.maximum(sn, 1e-300))
        v = swing * scale[:, None]
        v[:, 2] += twist
        e[:, 3:] = -np.einsum("bij,bj->bi", R_t, v)
        zz = np.einsum("bi,bj->bij", z, z)
        P[:, 3:, 3:] = np.where((scale > 0)[:, None, None], eye, zz)
    return e, P


def solve_ik_rows(
    chain: KinematicChain,
    positions: np.ndarray,
    normals: np.ndarray,
    tol: ToleranceSpec,
    seeds,
    budget: int = 150,
    pos_accuracy: float = POS_ACCURACY,
    rot_accuracy: float = ROT_ACCURACY,
    damping: float = 0.03,
    max_step: float = 0.3,
):
    """Damped least-squares IK, one target per seed row.

    ``positions`` and ``normals`` are (B, 3) and pair up with the (B, k)
    ``seeds``.  Rows never interact, so the result for a row does not
    depend on what else is in the batch.  Returns ``(configs, success)``.
    """
    q = chain.clip(np.array(seeds, dtype=float).reshape(-1, chain.dof))
    Pt = np.asarray(positions, dtype=float).reshape(-1, 3)
    N = np.asarray(normals, dtype=float).reshape(-1, 3)
    if len(Pt) != len(q) or len(N) != len(q):
        raise ValueError("need one target per seed")
    done = np.zeros(len(q), dtype=bool)
    lam2 = damping**2
    lower, upper = chain.lower, chain.upper
    for it in range(budget + 1):
        active = np.nonzero(~done)[0]
        if len(active) == 0:
            break
        pos, rot, J = chain.fk_jacobian_batch(q[active])
        pe, re = _pose_error_rows(pos, rot, Pt[active], N[active], tol)
        ok = _within(pe, re, pos_accuracy, rot_accuracy)
        done[active[ok]] = True
        keep = ~ok
        if not keep.any() or it == budget:
            break
        idx = active[keep]
        e, P = _task_error(pos[keep], rot[keep], Pt[idx], N[idx], tol)
        e = np.einsum("bij,bj->bi", P, e)
        Jp = P @ J[keep]
        qa = q[idx]
        at_lo = qa <= lower + 1e-9
        at_hi = qa >= upper - 1e-9
        frozen = np.zeros_like(at_lo)
        for _pass in range(3):
            Jf = np.where(frozen[:, None, :], 0.0, Jp)
            A = Jf @ Jf.transpose(0, 2, 1) + lam2 * np.eye(6)
            dq = np.einsum("bji,bj->bi", Jf, np.linalg.solve(A, e[..., None])[..., 0])
            # joints pinned at a limit and pushed outward drop out of the step
            blocked = ((at_lo & (dq < 0)) | (at_hi & (dq > 0))) & ~frozen
            if not blocked.any():
                break
            frozen |= blocked
        norm = np.abs(dq).max(axis=1, keepdims=True)
        dq *= np.minimum(1.0, max_step / np.maximum(norm, 1e-300))
        q[idx] = chain.clip(q[idx] + dq)
    return q, done


def solve_ik_batch(chain: KinematicChain, target: EndEffectorTarget, tol: ToleranceSpec, seeds, budget: int = 150, **kwargs):
    """Damped least-squares IK from many seeds toward one target.

    Returns ``(configs, success)`` with shapes (B, k) and (B,).  Each row
    is a local solution near its seed.
    """
    seeds = np.array(seeds, dtype=float).reshape(-1, chain.dof)
    B = len(seeds)
    return solve_ik_rows(
        chain, np.tile(target.position, (B, 1)), np.tile(target.normal, (B, 1)), tol, seeds, budget, **kwargs
    )


def solve_ik(
    chain: KinematicChain,
    target: EndEffectorTarget,
    tol: ToleranceSpec,
    seed,
    budget: int = 150,
    **kwargs,
) -> Optional[np.ndarray]:
    """Single-seed IK.  Returns the configuration, or None on failure."""
    seed = np.asarray(seed, dtype=float)
    if seed.shape != (chain.dof,):
        raise ValueError(f"seed must have {chain.dof} entries")
    q, ok = solve_ik_batch(chain, target, tol, seed[None], budget=budget, **kwargs)
    return q[0] if ok[0] else None


# ---------------------------------------------------------------- model files


def _parse_transform(rec, where: str) -> np.ndarray:
    if rec is None:
        return np.eye(4)
    try:
        return _transform(rec.get("translation", (0, 0, 0)), rec.get("rotation", (0, 0, 0)))
    except (TypeError, ValueError, AttributeError) as exc:
        raise ValueError(f"{where}: bad transform ({exc})") from None


def chain_from_dict(data: dict) -> KinematicChain:
    joints = []
    for k, rec in enumerate(data.get("joints", [])):
        where = f"joints[{k}]"
        for key in ("axis", "limits"):
            if key not in rec:
                raise ValueError(f"{where}: missing key {key!r}")
        joints.append(
            Joint(
                offset=_parse_transform(rec, where),
                axis=rec["axis"],
                limits=tuple(rec["limits"]),
                name=rec.get("name", f"j{k + 1}"),
            )
        )
    if not joints:
        raise ValueError("robot model has no joints")
    return KinematicChain(
        tuple(joints),
        base_transform=_parse_transform(data.get("base"), "base"),
        tool_transform=_parse_transform(data.get("tool"), "tool"),
        name=data.get("name", ""),
    )


def load_chain(path) -> KinematicChain:
    with open(path) as fh:
        return chain_from_dict(json.load(fh))


def bundled_chain(name: str) -> KinematicChain:
    if name not in BUNDLED_ROBOTS:
        raise ValueError(f"unknown bundled robot {name!r}; choose from {BUNDLED_ROBOTS}")
    text = resources.files("surfcover.data.robots").joinpath(f"{name}.json").read_text()
    return chain_from_dict(json.loads(text))


def resolve_chain(spec: str) -> KinematicChain:
    """A bundled model name or a path to a model file."""
    if spec in BUNDLED_ROBOTS:
        return bundled_chain(spec)
    if not Path(spec).exists():
        raise FileNotFoundError(f"robot model not found: {spec}")
    return load_chain(spec)
