"""Robot models, RK4 integration and (batched) rollout.

Three kinodynamic systems are supported:

* ``diffdrive``: state ``[px, py, theta, v]``, control ``[omega, a]``,
  ``f(x, u) = [v cos(theta), v sin(theta), omega, a]``.
* ``holo2d``: state ``[px, py, vx, vy]``, control ``[ax, ay]``.
* ``holo3d``: state ``[px, py, pz, vx, vy, vz]``, control ``[ax, ay, az]``.

Every layout stores the position components first, so the position of any
state is ``x[:position_dim]``.

Trajectories keep ``H + 1`` states (index 0 is the start) and ``H``
controls; ``controls[t]`` drives the transition ``t -> t + 1``. Controls are
box-clamped once, inside rollout, before any stage evaluation; the clamped
values are what the returned trajectory records.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._parallel import run_chunked
from .errors import ContractError, NumericFailure


class ModelKind(str, enum.Enum):
    DIFFDRIVE = "diffdrive"
    HOLO2D = "holo2d"
    HOLO3D = "holo3d"


_KIND_CODE = {ModelKind.DIFFDRIVE: 0, ModelKind.HOLO2D: 1, ModelKind.HOLO3D: 2}
_DIMS = {ModelKind.DIFFDRIVE: (4, 2), ModelKind.HOLO2D: (4, 2), ModelKind.HOLO3D: (6, 3)}

DEFAULT_CONTROL_BOUND = 2.0


@dataclass(frozen=True)
class DynamicsModel:
    kind: ModelKind
    state_dim: int
    control_dim: int
    control_lower: tuple[float, ...]
    control_upper: tuple[float, ...]

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if (self.state_dim, self.control_dim) != _DIMS[kind]:
            raise ContractError(
                f"{kind.value} requires (state_dim, control_dim) = {_DIMS[kind]}, "
                f"got {(self.state_dim, self.control_dim)}"
            )
        lo = tuple(float(v) for v in self.control_lower)
        hi = tuple(float(v) for v in self.control_upper)
        if len(lo) != self.control_dim or len(hi) != self.control_dim:
            raise ContractError("control bounds must have length control_dim")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ContractError("control_lower must be < control_upper elementwise")
        object.__setattr__(self, "control_lower", lo)
        object.__setattr__(self, "control_upper", hi)

    @classmethod
    def from_kind(cls, kind: str | ModelKind, bound: float = DEFAULT_CONTROL_BOUND,
                  lower=None, upper=None) -> "DynamicsModel":
        kind = ModelKind(kind)
        dx, du = _DIMS[kind]
        lower = (-bound,) * du if lower is None else tuple(lower)
        upper = (bound,) * du if upper is None else tuple(upper)
        return cls(kind, dx, du, lower, upper)

    @property
    def position_dim(self) -> int:
        return 3 if self.kind is ModelKind.HOLO3D else 2

    @property
    def code(self) -> int:
        return _KIND_CODE[self.kind]

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.control_lower, dtype=np.float64)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.control_upper, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "control_lower": list(self.control_lower),
            "control_upper": list(self.control_upper),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DynamicsModel":
        return cls.from_kind(data["kind"], lower=data.get("control_lower"),
                             upper=data.get("control_upper"))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class JointTrajectory:
    """Rolled-out states ``(n, H+1, d_x)`` and executed controls ``(n, H, d_u)``.

    The terminal state has no control of its own; :meth:`control_at` returns
    zeros for ``t == H``.
    """

    states: np.ndarray
    controls: np.ndarray
    dt: float
    positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        states = _frozen(self.states)
        controls = _frozen(self.controls)
        if states.ndim != 3 or controls.ndim != 3:
            raise ContractError("states and controls must be 3-D (robot, step, dim)")
        if states.shape[0] != controls.shape[0] or states.shape[1] != controls.shape[1] + 1:
            raise ContractError(
                f"inconsistent shapes: states {states.shape}, controls {controls.shape}"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "positions", states[..., : position_dim(states.shape[2])])

    @property
    def n_robots(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.controls.shape[1]

    def control_at(self, k: int, t: int) -> np.ndarray:
        if t == self.horizon:
            return np.zeros(self.controls.shape[2])
        return self.controls[k, t]


def position_dim(state_dim: int) -> int:
    return {4: 2, 6: 3}[state_dim]


# ---------------------------------------------------------------------------
# compiled kernels; ``kind`` is the integer code of ModelKind


@njit(cache=True, nogil=True, inline="always")
def _deriv_diffdrive(x, u, out):
    v = x[3]
    th = x[2]
    out[0] = v * math.cos(th)
    out[1] = v * math.sin(th)
    out[2] = u[0]
    out[3] = u[1]


@njit(cache=True, nogil=True, inline="always")
def _deriv_holo(x, u, out):
    d = u.shape[0]
    for j in range(d):
        out[j] = x[d + j]
        out[d + j] = u[j]


@njit(cache=True, nogil=True)
def _deriv(kind, x, u, out):
    if kind == 0:
        _deriv_diffdrive(x, u, out)
    else:
        _deriv_holo(x, u, out)


@njit(cache=True, nogil=True, inline="always")
def _rk4_diffdrive(x, u, dt, out, k1, k2, k3, k4, tmp):
    half = 0.5 * dt
    _deriv_diffdrive(x, u, k1)
    for j in range(4):
        tmp[j] = x[j] + half * k1[j]
    _deriv_diffdrive(tmp, u, k2)
    for j in range(4):
        tmp[j] = x[j] + half * k2[j]
    _deriv_diffdrive(tmp, u, k3)
    for j in range(4):
        tmp[j] = x[j] + dt * k3[j]
    _deriv_diffdrive(tmp, u, k4)
    sixth = dt / 6.0
    for j in range(4):
        out[j] = x[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@njit(cache=True, nogil=True, inline="always")
def _rk4_holo(x, u, dt, out, k1, k2, k3, k4, tmp):
    dx = x.shape[0]
    half = 0.5 * dt
    _deriv_holo(x, u, k1)
    for j in range(dx):
        tmp[j] = x[j] + half * k1[j]
    _deriv_holo(tmp, u, k2)
    for j in range(dx):
        tmp[j] = x[j] + half * k2[j]
    _deriv_holo(tmp, u, k3)
    for j in range(dx):
        tmp[j] = x[j] + dt * k3[j]
    _deriv_holo(tmp, u, k4)
    sixth = dt / 6.0
    for j in range(dx):
        out[j] = x[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@njit(cache=True, nogil=True)
def _rk4(kind, x, u, dt, out, k1, k2, k3, k4, tmp):
    if kind == 0:
        _rk4_diffdrive(x, u, dt, out, k1, k2, k3, k4, tmp)
    else:
        _rk4_holo(x, u, dt, out, k1, k2, k3, k4, tmp)


@njit(cache=True, nogil=True, inline="always")
def _clamp_into(controls, b, k, t, lower, upper, u, applied):
    for j in range(u.shape[0]):
        c = controls[b, k, t, j]
        if c < lower[j]:
            c = lower[j]
        elif c > upper[j]:
            c = upper[j]
        u[j] = c
        applied[b, k, t, j] = c


@njit(cache=True, nogil=True)
def _rollout_kernel(kind, starts, controls, lower, upper, dt, states, applied):
    B, n, H, du = controls.shape
    dx = starts.shape[1]
    x = np.empty(dx)
    u = np.empty(du)
    k1 = np.empty(dx)
    k2 = np.empty(dx)
    k3 = np.empty(dx)
    k4 = np.empty(dx)
    tmp = np.empty(dx)
    nxt = np.empty(dx)
    for b in range(B):
        for k in range(n):
            for j in range(dx):
                x[j] = starts[k, j]
                states[b, k, 0, j] = x[j]
            # branch outside the time loop so each model's step is fully inlined
            if kind == 0:
                for t in range(H):
                    _clamp_into(controls, b, k, t, lower, upper, u, applied)
                    _rk4_diffdrive(x, u, dt, nxt, k1, k2, k3, k4, tmp)
                    for j in range(dx):
                        x[j] = nxt[j]
                        states[b, k, t + 1, j] = nxt[j]
            else:
                for t in range(H):
                    _clamp_into(controls, b, k, t, lower, upper, u, applied)
                    _rk4_holo(x, u, dt, nxt, k1, k2, k3, k4, tmp)
                    for j in range(dx):
                        x[j] = nxt[j]
                        states[b, k, t + 1, j] = nxt[j]


# ---------------------------------------------------------------------------


def _check_vec(v, size, what):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (size,):
        raise ContractError(f"{what} must have shape ({size},), got {v.shape}")
    return v


def derivative(model: DynamicsModel, x, u) -> np.ndarray:
    x = _check_vec(x, model.state_dim, "state")
    u = _check_vec(u, model.control_dim, "control")
    out = np.empty(model.state_dim)
    _deriv(model.code, x, u, out)
    return out


def rk4_step(model: DynamicsModel, x, u, dt: float, step: int | None = None) -> np.ndarray:
    """One RK4 step with the control held constant over ``dt``."""
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    x = _check_vec(x, model.state_dim, "state")
    u = _check_vec(u, model.control_dim, "control")
    dx = model.state_dim
    out = np.empty(dx)
    scratch = [np.empty(dx) for _ in range(5)]
    _rk4(model.code, x, u, float(dt), out, *scratch)
    if not np.all(np.isfinite(out)):
        raise NumericFailure(f"non-finite state after RK4 step {step}", step=step)
    return out


def _as_starts(model, starts):
    starts = np.ascontiguousarray(starts, dtype=np.float64)
    if starts.ndim != 2 or starts.shape[1] != model.state_dim:
        raise ContractError(f"starts must have shape (n, {model.state_dim}), got {starts.shape}")
    return starts


def check_finite(states, batched: bool = True, offset: int = 0) -> None:
    """Raise NumericFailure naming the first non-finite (sample,) robot and step."""
    if np.all(np.isfinite(states)):
        return
    bad = np.argwhere(~np.isfinite(states).all(axis=-1))
    b, k, t = (bad[0] if batched else (None, *bad[0]))
    b = None if b is None else int(b) + offset
    where = f"robot {k}, step {t}" + ("" if b is None else f", sample {b}")
    raise NumericFailure(f"non-finite state during rollout ({where})",
                         robot=int(k), step=int(t), sample=b)


def rollout_arrays(model: DynamicsModel, starts, controls, dt: float, workers: int = 1):
    """Integrate a batch of joint control trajectories.

    ``controls`` has shape ``(B, n, H, d_u)``. Returns ``(states, applied)``
    with shapes ``(B, n, H+1, d_x)`` and ``(B, n, H, d_u)``. Non-finite
    results are returned as-is; callers decide whether to raise.
    """
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    starts = _as_starts(model, starts)
    controls = np.ascontiguousarray(controls, dtype=np.float64)
    if controls.ndim != 4 or controls.shape[1] != starts.shape[0] or controls.shape[3] != model.control_dim:
        raise ContractError(
            f"controls must have shape (B, {starts.shape[0]}, H, {model.control_dim}), got {controls.shape}"
        )
    B, n, H, _ = controls.shape
    states = np.empty((B, n, H + 1, model.state_dim))
    applied = np.empty_like(controls)
    lower, upper, code, dt = model.lower, model.upper, model.code, float(dt)

    def work(lo, hi):
        _rollout_kernel(code, starts, controls[lo:hi], lower, upper, dt,
                        states[lo:hi], applied[lo:hi])

    run_chunked(work, B, workers)
    return states, applied


def rollout(model: DynamicsModel, starts, controls, dt: float) -> JointTrajectory:
    """Roll out one joint control trajectory ``(n, H, d_u)`` from ``starts``."""
    controls = np.asarray(controls, dtype=np.float64)
    if controls.ndim != 3:
        raise ContractError(f"controls must have shape (n, H, d_u), got {controls.shape}")
    states, applied = rollout_arrays(model, starts, controls[None], dt)
    check_finite(states[0], batched=False)
    return JointTrajectory(states[0], applied[0], dt)


def batch_rollout(model: DynamicsModel, starts, controls, dt: float,
                  workers: int = 1) -> list[JointTrajectory]:
    """Roll out ``controls`` of shape ``(M, n, H, d_u)``; output order follows input."""
    states, applied = rollout_arrays(model, starts, controls, dt, workers)
    check_finite(states)
    return [JointTrajectory(s, a, dt) for s, a in zip(states, applied)]
