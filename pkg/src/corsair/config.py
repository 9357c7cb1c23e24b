"""Model ingredients: interaction kernels, congestion law, route field,
control set, initial data, and the derived a-priori constants.

All evaluators are pure functions of immutable specs and accept batched
inputs (trailing axis of length 2 for planar vectors). Every kernel family
exposes closed-form Lipschitz and supremum constants; the confinement radii
derived from them back the runtime invariant checks, so they are analytic
upper bounds rather than sampled estimates.

Units: positions and length scales in nautical distance units, times in
hours, kernel amplitudes in speed units, the danger kernel is dimensionless.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError
from .rng import InitialDistSpec

# Safe global Lipschitz factor for the gaussian-push family, per unit
# amplitude: 1 + 2*exp(-3/2). Valid for every length scale.
_GAUSS_PUSH_LIP = 1.0 + 2.0 * math.exp(-1.5)


# ---------------------------------------------------------------------------
# Kernel specs


@dataclass(frozen=True)
class KernelSpec:
    """Pairwise interaction kernel w -> sign * a * w * exp(-|w|^2 / (2 s^2)).

    ``repulsive`` pushes the affected ship away from the source (positive
    sign on w), ``attractive`` pulls it closer. The ``zero`` family switches
    the interaction off regardless of the other fields.
    """

    family: str = "radial_gaussian_push"
    amplitude: float = 0.0
    length_scale: float = 1.0
    sign: str = "repulsive"

    _FAMILIES = ("radial_gaussian_push", "zero")
    _SIGNS = ("repulsive", "attractive")

    def validate(self, where="kernel"):
        errs = []
        if self.family not in self._FAMILIES:
            errs.append(f"{where}.family must be one of {self._FAMILIES}")
        if not self.amplitude >= 0:
            errs.append(f"{where}.amplitude must be >= 0")
        if not self.length_scale > 0:
            errs.append(f"{where}.length_scale must be > 0")
        if self.sign not in self._SIGNS:
            errs.append(f"{where}.sign must be one of {self._SIGNS}")
        if errs:
            raise ConfigError(errs)

    @property
    def signum(self) -> float:
        return 1.0 if self.sign == "repulsive" else -1.0

    def lipschitz(self) -> float:
        """Global Lipschitz constant (safe closed-form bound)."""
        if self.family == "zero":
            return 0.0
        return self.amplitude * _GAUSS_PUSH_LIP

    def sup(self) -> float:
        """sup_w |K(w)|; the gaussian push peaks at |w| = length_scale."""
        if self.family == "zero":
            return 0.0
        return self.amplitude * self.length_scale * math.exp(-0.5)


def eval_kernel(spec: KernelSpec, w):
    """Evaluate the kernel at displacement(s) ``w`` (shape (..., 2))."""
    w = np.asarray(w, dtype=np.float64)
    if spec.family == "zero" or spec.amplitude == 0.0:
        return np.zeros_like(w)
    s2 = spec.length_scale ** 2
    q = np.sum(w * w, axis=-1, keepdims=True)
    return spec.signum * spec.amplitude * w * np.exp(-q / (2.0 * s2))


@dataclass(frozen=True)
class DangerKernelSpec:
    """Scalar contact-counting kernel: amplitude * exp(-|w|^2 / (2 r^2))."""

    amplitude: float = 1.0
    radius: float = 0.5

    def validate(self, where="danger"):
        errs = []
        if not self.amplitude >= 0:
            errs.append(f"{where}.amplitude must be >= 0")
        if not self.radius > 0:
            errs.append(f"{where}.radius must be > 0")
        if errs:
            raise ConfigError(errs)

    def lipschitz(self) -> float:
        return self.amplitude * math.exp(-0.5) / self.radius

    def sup(self) -> float:
        return self.amplitude


def eval_danger(spec: DangerKernelSpec, w):
    """Evaluate the danger kernel at displacement(s) ``w``; in [0, amplitude]."""
    w = np.asarray(w, dtype=np.float64)
    q = np.sum(w * w, axis=-1)
    if spec.amplitude == 0.0:
        return np.zeros_like(q)
    return spec.amplitude * np.exp(-q / (2.0 * spec.radius ** 2))


# ---------------------------------------------------------------------------
# Congestion


@dataclass(frozen=True)
class CongestionSpec:
    """Crowding kernel eta and speed law v.

    eta(x, w) = (|w|^2 / (|w|^2 + eta_core^2)) * exp(-|w_off|^2 / (2 eta_scale^2))

    where w_off = w - route_offset * r(x) when a route field is supplied
    (forward-looking counting) and w_off = w otherwise. The vanishing core
    factor guarantees eta(x, 0) = 0 in both variants, so a ship never counts
    itself. v(d) = v_max * (1 - clamp(d, 0, 1)) is linear non-increasing.
    """

    eta_scale: float = 0.5
    eta_core: float = 0.1
    v_max: float = 1.0
    route_offset: float = 0.0

    def validate(self, where="congestion"):
        errs = []
        if not self.eta_scale > 0:
            errs.append(f"{where}.eta_scale must be > 0")
        if not self.eta_core > 0:
            errs.append(f"{where}.eta_core must be > 0")
        if not self.v_max > 0:
            errs.append(f"{where}.v_max must be > 0")
        if not self.route_offset >= 0:
            errs.append(f"{where}.route_offset must be >= 0")
        if errs:
            raise ConfigError(errs)

    def eta_lipschitz(self) -> float:
        # |grad_w core| <= 3*sqrt(3)/(8*eps); |grad gauss| <= exp(-1/2)/scale
        return (3.0 * math.sqrt(3.0) / (8.0 * self.eta_core)
                + math.exp(-0.5) / self.eta_scale)

    def v_lipschitz(self) -> float:
        return self.v_max


def eval_eta(spec: CongestionSpec, x, w, route: "RouteFieldSpec | None" = None):
    """Crowding weight for a ship at ``x`` seeing a neighbor displaced by ``w``.

    Values lie in [0, 1] and eta(x, 0) = 0 exactly. ``x`` is only used by the
    forward-looking variant (route_offset > 0 with a route field).
    """
    w = np.asarray(w, dtype=np.float64)
    q = np.sum(w * w, axis=-1)
    core = q / (q + spec.eta_core ** 2)
    if spec.route_offset > 0.0 and route is not None:
        off = w - spec.route_offset * eval_route(route, x)
        q_off = np.sum(off * off, axis=-1)
    else:
        q_off = q
    return core * np.exp(-q_off / (2.0 * spec.eta_scale ** 2))


def eval_velocity(spec: CongestionSpec, density):
    """Congested speed; non-increasing in density, range [0, v_max]."""
    d = np.clip(np.asarray(density, dtype=np.float64), 0.0, 1.0)
    return spec.v_max * (1.0 - d)


# ---------------------------------------------------------------------------
# Route field


@dataclass(frozen=True)
class RouteFieldSpec:
    """Safe commercial route field.

    ``constant``: r(x) = direction. ``channel``: the constant heading plus a
    pull toward the lane through ``lane_center``, acting orthogonally to the
    travel direction:  r(x) = direction + stiffness * P_perp(lane_center - x).
    """

    family: str = "constant"
    direction: tuple[float, float] = (1.0, 0.0)
    lane_center: tuple[float, float] = (0.0, 0.0)
    lane_stiffness: float = 0.0

    _FAMILIES = ("constant", "channel")

    def validate(self, where="route"):
        errs = []
        if self.family not in self._FAMILIES:
            errs.append(f"{where}.family must be one of {self._FAMILIES}")
        d = np.asarray(self.direction, dtype=np.float64)
        if d.shape != (2,) or not np.all(np.isfinite(d)):
            errs.append(f"{where}.direction must be a finite 2-vector")
        elif not math.isclose(float(np.hypot(*d)), 1.0, rel_tol=1e-9):
            errs.append(f"{where}.direction must be a unit vector")
        if len(self.lane_center) != 2 or not np.all(np.isfinite(self.lane_center)):
            errs.append(f"{where}.lane_center must be a finite 2-vector")
        if not self.lane_stiffness >= 0:
            errs.append(f"{where}.lane_stiffness must be >= 0")
        if errs:
            raise ConfigError(errs)

    def lipschitz(self) -> float:
        return 0.0 if self.family == "constant" else self.lane_stiffness

    def growth(self) -> float:
        """C with |r(x)| <= C (1 + |x|)."""
        if self.family == "constant":
            return 1.0
        lc = float(np.hypot(*self.lane_center))
        return max(1.0 + self.lane_stiffness * lc, self.lane_stiffness)


def eval_route(spec: RouteFieldSpec, x):
    """Route vector at position(s) ``x`` (shape (..., 2))."""
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(spec.direction, dtype=np.float64)
    if spec.family == "constant":
        return np.broadcast_to(d, x.shape).copy()
    w = np.asarray(spec.lane_center, dtype=np.float64) - x
    along = np.sum(w * d, axis=-1, keepdims=True)
    perp = w - along * d
    return d + spec.lane_stiffness * perp


# ---------------------------------------------------------------------------
# Control set


@dataclass(frozen=True)
class ControlSetSpec:
    """Admissible guard accelerations: the compact box [-u_max, u_max]^(2L)."""

    u_max: float = 1.0
    n_guard: int = 1

    def validate(self, where="control_set"):
        errs = []
        if not self.u_max > 0:
            errs.append(f"{where}.u_max must be > 0")
        if self.n_guard < 1:
            errs.append(f"{where}.n_guard must be >= 1")
        if errs:
            raise ConfigError(errs)

    def contains(self, values, atol=0.0) -> bool:
        v = np.asarray(values, dtype=np.float64)
        return bool(np.all(np.abs(v) <= self.u_max + atol))

    def sup_norm_per_guard(self) -> float:
        # Euclidean bound of a single guard's control vector.
        return math.sqrt(2.0) * self.u_max


# ---------------------------------------------------------------------------
# Commercial initial points (deterministic low-discrepancy families)

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class CommercialInitSpec:
    """Deterministic initial commercial positions.

    ``points`` uses the explicit list. ``disk`` and ``gaussian`` place n
    points on a sunflower spiral whose radial quantiles match the uniform law
    on a disk resp. an isotropic normal, so the empirical measure converges
    to that law as n grows. The matching continuous law seeds the mean-field
    commercial density.
    """

    family: str = "disk"
    points: tuple = ()
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    scale: float = 1.0

    _FAMILIES = ("points", "disk", "gaussian")

    def validate(self, where="initial.commercial"):
        errs = []
        if self.family not in self._FAMILIES:
            errs.append(f"{where}.family must be one of {self._FAMILIES}")
        elif self.family == "points":
            pts = np.asarray(self.points, dtype=np.float64)
            if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1 \
                    or not np.all(np.isfinite(pts)):
                errs.append(f"{where}.points must be a nonempty list of "
                            "finite [x, y] pairs")
        if len(self.center) != 2 or not np.all(np.isfinite(self.center)):
            errs.append(f"{where}.center must be a finite 2-vector")
        if self.family == "disk" and not self.radius > 0:
            errs.append(f"{where}.radius must be > 0")
        if self.family == "gaussian" and not self.scale > 0:
            errs.append(f"{where}.scale must be > 0")
        if errs:
            raise ConfigError(errs)

    def generate(self, n: int) -> np.ndarray:
        """n deterministic points whose empirical law approximates the family."""
        if self.family == "points":
            pts = np.asarray(self.points, dtype=np.float64)
            if n != pts.shape[0]:
                raise ConfigError(
                    f"initial.commercial.points has {pts.shape[0]} entries "
                    f"but n_commercial={n}")
            return pts.copy()
        k = np.arange(n, dtype=np.float64)
        u = (k + 0.5) / n
        theta = k * _GOLDEN_ANGLE
        if self.family == "disk":
            r = self.radius * np.sqrt(u)
        else:  # gaussian: radial quantiles of the 2-d isotropic normal
            r = self.scale * np.sqrt(-2.0 * np.log1p(-u))
        c = np.asarray(self.center, dtype=np.float64)
        return c + np.column_stack((r * np.cos(theta), r * np.sin(theta)))

    def limit_law(self) -> InitialDistSpec:
        """The continuous law the generated points discretize."""
        if self.family == "points":
            raise ConfigError(
                "initial.commercial.family='points' has no continuous limit "
                "law; use the 'disk' or 'gaussian' family for mean-field runs")
        if self.family == "disk":
            return InitialDistSpec("disk", tuple(self.center), radius=self.radius)
        return InitialDistSpec("gaussian", tuple(self.center), scale=self.scale)

    def support_radius(self, n: int) -> float:
        return float(np.max(np.hypot(*self.generate(n).T))) if n else 0.0


# ---------------------------------------------------------------------------
# Numerics knobs (discretization defaults; everything overridable per run)


@dataclass(frozen=True)
class NumericsSpec:
    dt: float | None = None          # time step; None -> horizon / 512
    control_cells: int = 16          # piecewise-constant control resolution
    ensemble_size: int = 256         # sample paths for the averaged model
    n_particles: int = 1024          # mean-field commercial particles
    grid_nx: int = 96                # pirate-law grid cells per axis
    grid_ny: int = 96
    grid_halfwidth: float | None = None  # None -> auto from a-priori radii
    replications: int = 8            # Monte Carlo replications for costs
    eta_pairwise_max: int = 1024     # particle count above which the crowding
                                     # density switches to the gridded path

    def validate(self, where="numerics"):
        errs = []
        if self.dt is not None and not self.dt > 0:
            errs.append(f"{where}.dt must be > 0 or null")
        for name in ("control_cells", "ensemble_size", "n_particles",
                     "grid_nx", "grid_ny", "replications", "eta_pairwise_max"):
            if getattr(self, name) < 1:
                errs.append(f"{where}.{name} must be >= 1")
        if self.grid_halfwidth is not None and not self.grid_halfwidth > 0:
            errs.append(f"{where}.grid_halfwidth must be > 0 or null")
        if errs:
            raise ConfigError(errs)


# ---------------------------------------------------------------------------
# Full model configuration


@dataclass(frozen=True)
class ModelConfig:
    n_commercial: int = 8
    n_pirate: int = 16
    n_guard: int = 2
    horizon: float = 2.0
    kappa: float = 0.05

    kernel_cp: KernelSpec = field(default_factory=KernelSpec)  # pirates -> commercial
    kernel_pg: KernelSpec = field(default_factory=KernelSpec)  # guards -> pirates
    kernel_pc: KernelSpec = field(default_factory=KernelSpec)  # commercial -> pirates
    kernel_gg: KernelSpec = field(default_factory=KernelSpec)  # guard self-repulsion

    danger: DangerKernelSpec = field(default_factory=DangerKernelSpec)
    congestion: CongestionSpec = field(default_factory=CongestionSpec)
    route: RouteFieldSpec = field(default_factory=RouteFieldSpec)
    control_set: ControlSetSpec = field(default_factory=ControlSetSpec)

    commercial_init: CommercialInitSpec = field(default_factory=CommercialInitSpec)
    pirate_init: InitialDistSpec = field(
        default_factory=lambda: InitialDistSpec("gaussian"))
    guard_init: tuple = ((0.0, 0.0),)

    numerics: NumericsSpec = field(default_factory=NumericsSpec)

    def validate(self):
        errs = []
        for name in ("n_commercial", "n_pirate", "n_guard"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1")
        if not self.horizon > 0:
            errs.append("horizon must be > 0")
        # kappa = 0 is allowed for deterministic diagnostics; the averaged /
        # mean-field fixed-point machinery assumes kappa > 0.
        if not self.kappa >= 0:
            errs.append("kappa must be >= 0")
        for name in ("kernel_cp", "kernel_pg", "kernel_pc", "kernel_gg"):
            try:
                getattr(self, name).validate(where=f"kernels.{name[7:]}")
            except ConfigError as e:
                errs.extend(e.violations)
        for name in ("danger", "congestion", "route", "control_set"):
            try:
                getattr(self, name).validate(where=name)
            except ConfigError as e:
                errs.extend(e.violations)
        try:
            self.commercial_init.validate()
        except ConfigError as e:
            errs.extend(e.violations)
        try:
            self.pirate_init.validate(where="initial.pirate")
        except ConfigError as e:
            errs.extend(e.violations)
        gz = np.asarray(self.guard_init, dtype=np.float64)
        if gz.ndim != 2 or gz.shape[1] != 2 or not np.all(np.isfinite(gz)):
            errs.append("initial.guard must be a list of finite [x, y] pairs")
        elif gz.shape[0] != self.n_guard:
            errs.append(f"initial.guard has {gz.shape[0]} entries but "
                        f"n_guard={self.n_guard}")
        if self.control_set.n_guard != self.n_guard:
            errs.append("control_set.n_guard must equal n_guard")
        try:
            self.numerics.validate()
        except ConfigError as e:
            errs.extend(e.violations)
        if errs:
            raise ConfigError(errs)
        return self

    # -- derived quantities ------------------------------------------------

    @property
    def dt(self) -> float:
        return self.numerics.dt if self.numerics.dt else self.horizon / 512.0

    def commercial_points(self) -> np.ndarray:
        return self.commercial_init.generate(self.n_commercial)

    def guard_points(self) -> np.ndarray:
        return np.asarray(self.guard_init, dtype=np.float64)


# ---------------------------------------------------------------------------
# Constants report


@dataclass(frozen=True)
class ConstantsReport:
    """Closed-form Lipschitz/growth constants and a-priori confinement radii.

    All radii are analytic upper bounds obtained from linear-growth estimates
    and Gronwall's inequality; runtime checks may compare trajectories against
    them without sampling slack.
    """

    kernel_lipschitz: dict
    kernel_sup: dict
    danger_lipschitz: float
    danger_sup: float
    eta_lipschitz: float
    v_lipschitz: float
    route_lipschitz: float
    route_growth: float
    guard_speed: float       # bound on |dZ/dt|
    commercial_growth: float  # C with |dX/dt| <= C (1 + |X|)
    pirate_drift_sup: float  # bound on the deterministic pirate drift
    radius_guard: float      # |Z_l(t)| never exceeds this
    radius_commercial: float  # max_n |X_n(t)| never exceeds this
    radius_pirate: float     # drift reach of pirates (excludes noise)
    brownian_spread: float   # sqrt(2 kappa T)

    def max_drift_lipschitz(self) -> float:
        """Stiffness scale used by the integrator step-size policy."""
        lk = self.kernel_lipschitz
        commercial = self.v_lipschitz * self.eta_lipschitz + self.route_lipschitz \
            + lk["cp"]
        pirate = lk["pg"] + lk["pc"]
        guard = lk["gg"]
        return max(commercial, pirate, guard)


def lipschitz_constants(cfg: ModelConfig) -> ConstantsReport:
    T = cfg.horizon
    ks = {"cp": cfg.kernel_cp, "pg": cfg.kernel_pg,
          "pc": cfg.kernel_pc, "gg": cfg.kernel_gg}
    lip = {k: v.lipschitz() for k, v in ks.items()}
    sup = {k: v.sup() for k, v in ks.items()}

    # Guards: |dZ/dt| <= sup|K_gg| + sqrt(2) u_max, a constant, so the
    # linear-growth Gronwall radius (|Z0| + C T) e^{C T} applies with C equal
    # to that constant.
    c_guard = sup["gg"] + cfg.control_set.sup_norm_per_guard()
    z0 = cfg.guard_points()
    r_z0 = float(np.max(np.hypot(z0[:, 0], z0[:, 1])))
    radius_guard = (r_z0 + c_guard * T) * math.exp(c_guard * T)

    # Commercial: |dX/dt| <= v_max (|r(X)| + sup|K_cp|)
    #           <= v_max (C_r + sup|K_cp|) (1 + |X|).
    c_comm = cfg.congestion.v_max * (cfg.route.growth() + sup["cp"])
    x0 = cfg.commercial_points()
    r_x0 = float(np.max(np.hypot(x0[:, 0], x0[:, 1])))
    radius_commercial = (r_x0 + c_comm * T) * math.exp(c_comm * T)

    # Pirates: bounded deterministic drift; noise handled separately via the
    # Brownian spread when sizing truncated domains.
    d_pirate = sup["pg"] + sup["pc"]
    radius_pirate = cfg.pirate_init.support_radius() + d_pirate * T

    return ConstantsReport(
        kernel_lipschitz=lip,
        kernel_sup=sup,
        danger_lipschitz=cfg.danger.lipschitz(),
        danger_sup=cfg.danger.sup(),
        eta_lipschitz=cfg.congestion.eta_lipschitz(),
        v_lipschitz=cfg.congestion.v_lipschitz(),
        route_lipschitz=cfg.route.lipschitz(),
        route_growth=cfg.route.growth(),
        guard_speed=c_guard,
        commercial_growth=c_comm,
        pirate_drift_sup=d_pirate,
        radius_guard=radius_guard,
        radius_commercial=radius_commercial,
        radius_pirate=radius_pirate,
        brownian_spread=math.sqrt(2.0 * cfg.kappa * T),
    )


# ---------------------------------------------------------------------------
# JSON round trip (strict: unknown keys are rejected)


def _take(obj: dict, where: str, allowed: dict):
    """Check ``obj`` against ``allowed`` (key -> required flag)."""
    if not isinstance(obj, dict):
        raise ConfigError([f"{where} must be an object"])
    errs = [f"unknown key '{where}.{k}'" for k in obj if k not in allowed]
    errs += [f"missing required key '{where}.{k}'"
             for k, required in allowed.items() if required and k not in obj]
    if errs:
        raise ConfigError(errs)


def _kernel_from(obj, where):
    _take(obj, where, {"family": False, "amplitude": False,
                       "length_scale": False, "sign": False})
    return KernelSpec(
        family=obj.get("family", "radial_gaussian_push"),
        amplitude=float(obj.get("amplitude", 0.0)),
        length_scale=float(obj.get("length_scale", 1.0)),
        sign=obj.get("sign", "repulsive"),
    )


def _dist_from(obj, where):
    _take(obj, where, {"family": True, "center": False,
                       "radius": False, "scale": False})
    return InitialDistSpec(
        family=obj["family"],
        center=tuple(obj.get("center", (0.0, 0.0))),
        radius=float(obj.get("radius", 1.0)),
        scale=float(obj.get("scale", 1.0)),
    )


def config_from_dict(doc: dict) -> ModelConfig:
    _take(doc, "config", {
        "counts": True, "horizon": True, "kappa": True, "kernels": True,
        "danger": True, "congestion": True, "route": True,
        "control_set": True, "initial": True, "numerics": False,
        "control": False,
    })
    counts = doc["counts"]
    _take(counts, "counts", {"n_commercial": True, "n_pirate": True,
                             "n_guard": True})
    kernels = doc["kernels"]
    _take(kernels, "kernels", {"cp": True, "pg": True, "pc": True, "gg": True})

    danger = doc["danger"]
    _take(danger, "danger", {"amplitude": True, "radius": True})

    cong = doc["congestion"]
    _take(cong, "congestion", {"eta_scale": True, "eta_core": True,
                               "v_max": True, "route_offset": False})

    route = doc["route"]
    _take(route, "route", {"family": True, "direction": False,
                           "lane_center": False, "lane_stiffness": False})

    cset = doc["control_set"]
    _take(cset, "control_set", {"u_max": True})

    init = doc["initial"]
    _take(init, "initial", {"commercial": True, "pirate": True, "guard": True})
    cinit = init["commercial"]
    _take(cinit, "initial.commercial",
          {"family": True, "points": False, "center": False,
           "radius": False, "scale": False})

    num_doc = doc.get("numerics", {})
    _take(num_doc, "numerics", {
        "dt": False, "control_cells": False, "ensemble_size": False,
        "n_particles": False, "grid_nx": False, "grid_ny": False,
        "grid_halfwidth": False, "replications": False,
        "eta_pairwise_max": False,
    })
    defaults = NumericsSpec()
    numerics = NumericsSpec(
        dt=None if num_doc.get("dt") is None else float(num_doc["dt"]),
        control_cells=int(num_doc.get("control_cells", defaults.control_cells)),
        ensemble_size=int(num_doc.get("ensemble_size", defaults.ensemble_size)),
        n_particles=int(num_doc.get("n_particles", defaults.n_particles)),
        grid_nx=int(num_doc.get("grid_nx", defaults.grid_nx)),
        grid_ny=int(num_doc.get("grid_ny", defaults.grid_ny)),
        grid_halfwidth=(None if num_doc.get("grid_halfwidth") is None
                        else float(num_doc["grid_halfwidth"])),
        replications=int(num_doc.get("replications", defaults.replications)),
        eta_pairwise_max=int(num_doc.get("eta_pairwise_max",
                                         defaults.eta_pairwise_max)),
    )

    cfg = ModelConfig(
        n_commercial=int(counts["n_commercial"]),
        n_pirate=int(counts["n_pirate"]),
        n_guard=int(counts["n_guard"]),
        horizon=float(doc["horizon"]),
        kappa=float(doc["kappa"]),
        kernel_cp=_kernel_from(kernels["cp"], "kernels.cp"),
        kernel_pg=_kernel_from(kernels["pg"], "kernels.pg"),
        kernel_pc=_kernel_from(kernels["pc"], "kernels.pc"),
        kernel_gg=_kernel_from(kernels["gg"], "kernels.gg"),
        danger=DangerKernelSpec(amplitude=float(danger["amplitude"]),
                                radius=float(danger["radius"])),
        congestion=CongestionSpec(
            eta_scale=float(cong["eta_scale"]),
            eta_core=float(cong["eta_core"]),
            v_max=float(cong["v_max"]),
            route_offset=float(cong.get("route_offset", 0.0)),
        ),
        route=RouteFieldSpec(
            family=route["family"],
            direction=tuple(route.get("direction", (1.0, 0.0))),
            lane_center=tuple(route.get("lane_center", (0.0, 0.0))),
            lane_stiffness=float(route.get("lane_stiffness", 0.0)),
        ),
        control_set=ControlSetSpec(u_max=float(cset["u_max"]),
                                   n_guard=int(counts["n_guard"])),
        commercial_init=CommercialInitSpec(
            family=cinit["family"],
            points=tuple(tuple(p) for p in cinit.get("points", ())),
            center=tuple(cinit.get("center", (0.0, 0.0))),
            radius=float(cinit.get("radius", 1.0)),
            scale=float(cinit.get("scale", 1.0)),
        ),
        pirate_init=_dist_from(init["pirate"], "initial.pirate"),
        guard_init=tuple(tuple(p) for p in init["guard"]),
        numerics=numerics,
    )
    return cfg.validate()


def config_to_dict(cfg: ModelConfig) -> dict:
    return {
        "counts": {"n_commercial": cfg.n_commercial,
                   "n_pirate": cfg.n_pirate,
                   "n_guard": cfg.n_guard},
        "horizon": cfg.horizon,
        "kappa": cfg.kappa,
        "kernels": {k: asdict(getattr(cfg, f"kernel_{k}"))
                    for k in ("cp", "pg", "pc", "gg")},
        "danger": asdict(cfg.danger),
        "congestion": asdict(cfg.congestion),
        "route": {"family": cfg.route.family,
                  "direction": list(cfg.route.direction),
                  "lane_center": list(cfg.route.lane_center),
                  "lane_stiffness": cfg.route.lane_stiffness},
        "control_set": {"u_max": cfg.control_set.u_max},
        "initial": {
            "commercial": {
                "family": cfg.commercial_init.family,
                "points": [list(p) for p in cfg.commercial_init.points],
                "center": list(cfg.commercial_init.center),
                "radius": cfg.commercial_init.radius,
                "scale": cfg.commercial_init.scale,
            },
            "pirate": {"family": cfg.pirate_init.family,
                       "center": list(cfg.pirate_init.center),
                       "radius": cfg.pirate_init.radius,
                       "scale": cfg.pirate_init.scale},
            "guard": [list(p) for p in cfg.guard_init],
        },
        "numerics": asdict(cfg.numerics),
    }


def load_config(path) -> ModelConfig:
    """Parse and fully validate a config JSON file."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError([f"config parse error: {e}"]) from e
    return config_from_dict(doc)


def default_config() -> ModelConfig:
    """The packaged desk-scale configuration."""
    from importlib.resources import files
    doc = json.loads(files("corsair.configs").joinpath("default.json")
                     .read_text())
    return config_from_dict(doc)
