"""Piecewise-constant guard controls on a uniform partition of [0, T]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ControlSetSpec
from .errors import ConfigError


@dataclass(frozen=True)
class PiecewiseConstantControl:
    """u(t) constant on each of ``n_cells`` equal cells of [0, horizon].

    ``values`` has shape (n_cells, n_guard, 2). Feasibility (every entry in
    the control box) is established via :func:`project` or
    :meth:`validate_in_box`; raw probe controls used by finite differences
    may sit slightly outside.
    """

    horizon: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 2 or v.shape[0] < 1:
            raise ConfigError(
                "control values must have shape (n_cells, n_guard, 2)")
        if not np.all(np.isfinite(v)):
            raise ConfigError("control values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    @property
    def n_guard(self) -> int:
        return self.values.shape[1]

    @property
    def cell_width(self) -> float:
        return self.horizon / self.n_cells

    def at(self, t: float) -> np.ndarray:
        """Control value at time t (left-continuous cells; t = T uses the last)."""
        k = min(int(t / self.cell_width), self.n_cells - 1)
        return self.values[max(k, 0)]

    def steps_per_cell(self, dt: float) -> int:
        """Integration steps per control cell; dt must divide the cell width."""
        ratio = self.cell_width / dt
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
            raise ConfigError(
                f"dt={dt:.6g} does not divide the control cell width "
                f"{self.cell_width:.6g}")
        return k

    def cell_of_step(self, step: int, dt: float) -> int:
        # Left-endpoint sampling of u on the integration grid.
        return min(step // self.steps_per_cell(dt), self.n_cells - 1)

    def validate_in_box(self, cset: ControlSetSpec, atol=1e-12):
        if self.n_guard != cset.n_guard:
            raise ConfigError(
                f"control has {self.n_guard} guards, set has {cset.n_guard}")
        if not cset.contains(self.values, atol=atol):
            raise ConfigError("control values exceed the admissible box")
        return self

    def with_values(self, values) -> "PiecewiseConstantControl":
        return PiecewiseConstantControl(self.horizon, np.asarray(values))


def zero_control(horizon: float, n_guard: int,
                 n_cells: int = 16) -> PiecewiseConstantControl:
    return PiecewiseConstantControl(
        horizon, np.zeros((n_cells, n_guard, 2)))


def constant_control(horizon: float, value,
                     n_cells: int = 16) -> PiecewiseConstantControl:
    """Same (n_guard, 2) value on every cell."""
    v = np.asarray(value, dtype=np.float64)
    return PiecewiseConstantControl(
        horizon, np.tile(v, (n_cells, 1, 1)))


def bang_bang_control(horizon: float, value,
                      n_cells: int = 16) -> PiecewiseConstantControl:
    """Alternate +value / -value across cells."""
    v = np.asarray(value, dtype=np.float64)
    signs = np.where(np.arange(n_cells) % 2 == 0, 1.0, -1.0)
    return PiecewiseConstantControl(
        horizon, signs[:, None, None] * v[None, :, :])


def project(raw, cset: ControlSetSpec, horizon: float) -> PiecewiseConstantControl:
    """Componentwise clamp onto the control box; idempotent."""
    v = np.asarray(raw, dtype=np.float64)
    if isinstance(raw, PiecewiseConstantControl):
        v = raw.values
    clipped = np.clip(v, -cset.u_max, cset.u_max)
    return PiecewiseConstantControl(horizon, clipped)


def control_energy(u: PiecewiseConstantControl) -> float:
    """(1/2) integral of |u(t)|^2 dt, exact for piecewise-constant u."""
    return 0.5 * u.cell_width * float(np.sum(u.values ** 2))
