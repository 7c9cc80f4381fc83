"""Run configuration: YAML (or JSON) file -> validated :class:`RunConfig`.

Key schema (defaults in brackets)::

    mode: rve-tangent | rve-stress | fe2-run | fsi-rve | fd-check
    rve:
      nx, ny [8, 8]            lx, ly [1.0, 1.0]
      bc: affine | periodic [affine]
      quadrature: 1 | 2 [2]
      physics: mechanical | fsi [mechanical; forced to fsi for fsi-rve/fd-check]
      microstructure: {kind: homogeneous | laminate | inclusion | void,
                       direction [x], fraction [0.5], center [[0.5 lx, 0.5 ly]], radius [0.25]}
    materials: {<tag>: {E: .., nu: ..}}       # fsi: tag 0 is the solid, tag 1 the fluid
    load: {F_M [identity], p_c [0.0], grad_p [[0, 0]], X_c [cell center]}
    fsi: {gamma [1e-3], viscosity [1.0], tau [h^2/(4 viscosity)]}
    macro:                                     # fe2-run only
      nx, ny [2, 2]  lx, ly [1.0, 1.0]  gauss_order [2]
      supports: [{edge|corner: .., component: 0|1}, ...]
      load_program: [{traction: {<edge>: [tx, ty]},
                      displacement: [{edge|corner: .., component: .., value: ..}]}, ...]
      # or: steps: <n> with increment: {traction: .., displacement: ..}
      pressure: {p0 [0.0], grad [[0, 0]]}      # driver field for fsi RVEs
    tol [1e-8]  max_iter [25]  seed [0]  threads [1]  cache_dir [none]

Corners are named ``bottom-left``, ``bottom-right``, ``top-right``, ``top-left``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .fem import Material
from .mesh import MicrostructureSpec

MODES = ("rve-tangent", "rve-stress", "fe2-run", "fsi-rve", "fd-check")
EDGES = ("left", "right", "bottom", "top")
CORNERS = ("bottom-left", "bottom-right", "top-right", "top-left")
DEFAULT_TOL = 1e-8
DEFAULT_GAMMA = 1e-3


@dataclass
class RveConfig:
    nx: int = 8
    ny: int = 8
    lx: float = 1.0
    ly: float = 1.0
    bc: str = "affine"
    quadrature: int = 2
    physics: str = "mechanical"
    microstructure: MicrostructureSpec = field(default_factory=MicrostructureSpec.homogeneous)


@dataclass
class LoadConfig:
    F_M: np.ndarray = field(default_factory=lambda: np.eye(2))
    p_c: float = 0.0
    grad_p: np.ndarray = field(default_factory=lambda: np.zeros(2))
    X_c: np.ndarray | None = None


@dataclass
class FsiConfig:
    gamma: float = DEFAULT_GAMMA
    viscosity: float = 1.0
    tau: float | None = None


@dataclass
class Constraint:
    """Edge or corner DOF set; ``value`` is an increment for load steps, 0 for supports."""

    where: str
    component: int
    value: float = 0.0


@dataclass
class StepConfig:
    traction: dict[str, np.ndarray] = field(default_factory=dict)
    displacement: list[Constraint] = field(default_factory=list)


@dataclass
class MacroConfig:
    nx: int = 2
    ny: int = 2
    lx: float = 1.0
    ly: float = 1.0
    gauss_order: int = 2
    supports: list[Constraint] = field(default_factory=list)
    load_program: list[StepConfig] = field(default_factory=list)
    pressure_p0: float = 0.0
    pressure_grad: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass
class RunConfig:
    mode: str
    rve: RveConfig
    materials: dict[int, Material]
    load: LoadConfig
    fsi: FsiConfig
    macro: MacroConfig | None
    tol: float = DEFAULT_TOL
    max_iter: int = 25
    seed: int = 0
    threads: int = 1
    cache_dir: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def is_fsi(self) -> bool:
        return self.rve.physics == "fsi"


class _Reader:
    """Typed lookups that record every problem with its key path."""

    def __init__(self):
        self.errors: list[str] = []

    def section(self, d, key, path):
        v = d.get(key, {}) if isinstance(d, dict) else {}
        if v is None:
            return {}
        if not isinstance(v, dict):
            self.errors.append(f"{path}: expected a mapping, got {type(v).__name__}")
            return {}
        return v

    def get(self, d, key, kind, path, default=None, check=None, msg=""):
        if not isinstance(d, dict) or key not in d or d[key] is None:
            return default
        v = d[key]
        try:
            if kind is int:
                if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
                    raise TypeError
                v = int(v)
            elif kind is float:
                if isinstance(v, bool):
                    raise TypeError
                v = float(v)
            elif kind is str:
                if not isinstance(v, str):
                    raise TypeError
            elif kind == "vec2":
                v = np.asarray(v, dtype=float)
                if v.shape != (2,):
                    raise TypeError
            elif kind == "mat2":
                v = np.asarray(v, dtype=float)
                if v.shape != (2, 2):
                    raise TypeError
        except (TypeError, ValueError):
            label = kind if isinstance(kind, str) else kind.__name__
            self.errors.append(f"{path}: expected {label}, got {d[key]!r}")
            return default
        if check is not None and not check(v):
            self.errors.append(f"{path}: {msg or 'invalid value'} (got {d[key]!r})")
            return default
        return v

    def require(self, d, key, path):
        if not isinstance(d, dict) or d.get(key) is None:
            self.errors.append(f"{path}: missing required key")
            return False
        return True


def _constraint(r: _Reader, item, path, with_value: bool) -> Constraint | None:
    if not isinstance(item, dict):
        r.errors.append(f"{path}: expected a mapping with edge/corner and component")
        return None
    where = None
    if "edge" in item:
        where = r.get(item, "edge", str, f"{path}.edge", check=lambda s: s in EDGES, msg=f"edge must be one of {EDGES}")
    elif "corner" in item:
        where = r.get(item, "corner", str, f"{path}.corner", check=lambda s: s in CORNERS, msg=f"corner must be one of {CORNERS}")
    else:
        r.errors.append(f"{path}: needs 'edge' or 'corner'")
    comp = r.get(item, "component", int, f"{path}.component", check=lambda c: c in (0, 1), msg="component must be 0 or 1")
    if comp is None and "component" not in item:
        r.errors.append(f"{path}.component: missing required key")
    value = 0.0
    if with_value:
        value = r.get(item, "value", float, f"{path}.value", default=0.0)
    if where is None or comp is None:
        return None
    return Constraint(where, comp, value)


def _step(r: _Reader, d, path) -> StepConfig:
    step = StepConfig()
    if not isinstance(d, dict):
        r.errors.append(f"{path}: expected a mapping")
        return step
    tr = r.section(d, "traction", f"{path}.traction")
    for edge in tr:
        if edge not in EDGES:
            r.errors.append(f"{path}.traction.{edge}: unknown edge; expected one of {EDGES}")
            continue
        v = r.get(tr, edge, "vec2", f"{path}.traction.{edge}")
        if v is not None:
            step.traction[edge] = v
    disp = d.get("displacement", []) or []
    if not isinstance(disp, list):
        r.errors.append(f"{path}.displacement: expected a list")
        disp = []
    for k, item in enumerate(disp):
        c = _constraint(r, item, f"{path}.displacement[{k}]", True)
        if c is not None:
            step.displacement.append(c)
    return step


def _microstructure(r: _Reader, d, path, lx, ly) -> MicrostructureSpec:
    kind = r.get(d, "kind", str, f"{path}.kind", "homogeneous",
                 check=lambda s: s in ("homogeneous", "laminate", "inclusion", "void"),
                 msg="kind must be homogeneous, laminate, inclusion or void")
    direction = r.get(d, "direction", str, f"{path}.direction", "x", check=lambda s: s in ("x", "y"), msg="direction must be x or y")
    fraction = r.get(d, "fraction", float, f"{path}.fraction", 0.5, check=lambda f: 0 < f < 1, msg="fraction must lie in (0, 1)")
    center = r.get(d, "center", "vec2", f"{path}.center", np.array([0.5 * lx, 0.5 * ly]))
    radius = r.get(d, "radius", float, f"{path}.radius", 0.25, check=lambda v: v > 0, msg="radius must be positive")
    if kind == "laminate":
        return MicrostructureSpec.laminate(direction, fraction)
    if kind == "inclusion":
        return MicrostructureSpec.inclusion(tuple(center), radius)
    if kind == "void":
        return MicrostructureSpec.void(tuple(center), radius)
    return MicrostructureSpec.homogeneous()


def required_tags(spec: MicrostructureSpec, physics: str) -> set[int]:
    if physics == "fsi":
        return {0}
    if spec.kind in ("laminate",):
        return {0, 1}
    if spec.kind == "inclusion":
        return {0, spec.inside_tag}
    return {0}


def build_config(raw: dict, mode: str | None = None) -> RunConfig:
    """Validate a parsed mapping; raises :class:`ConfigError` listing every problem."""
    r = _Reader()
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping"])
    file_mode = raw.get("mode")
    if mode is None:
        mode = file_mode
    elif file_mode is not None and file_mode != mode:
        r.errors.append(f"mode: config says {file_mode!r} but {mode!r} was requested")
    if mode is None:
        r.errors.append("mode: missing required key")
    elif mode not in MODES:
        r.errors.append(f"mode: unknown mode {mode!r}; expected one of {MODES}")

    rv = r.section(raw, "rve", "rve")
    lx = r.get(rv, "lx", float, "rve.lx", 1.0, check=lambda v: v > 0, msg="must be positive")
    ly = r.get(rv, "ly", float, "rve.ly", 1.0, check=lambda v: v > 0, msg="must be positive")
    physics = r.get(rv, "physics", str, "rve.physics", "mechanical",
                    check=lambda s: s in ("mechanical", "fsi"), msg="physics must be mechanical or fsi")
    if mode in ("fsi-rve", "fd-check"):
        physics = "fsi"
    rve = RveConfig(
        nx=r.get(rv, "nx", int, "rve.nx", 8, check=lambda v: v >= 1, msg="must be >= 1"),
        ny=r.get(rv, "ny", int, "rve.ny", 8, check=lambda v: v >= 1, msg="must be >= 1"),
        lx=lx,
        ly=ly,
        bc=r.get(rv, "bc", str, "rve.bc", "affine", check=lambda s: s in ("affine", "periodic"), msg="bc must be affine or periodic"),
        quadrature=r.get(rv, "quadrature", int, "rve.quadrature", 2, check=lambda q: q in (1, 2), msg="quadrature must be 1 or 2"),
        physics=physics,
        microstructure=_microstructure(r, r.section(rv, "microstructure", "rve.microstructure"), "rve.microstructure", lx, ly),
    )

    materials: dict[int, Material] = {}
    mats = raw.get("materials") or {}
    if not isinstance(mats, dict):
        r.errors.append("materials: expected a mapping from phase tag to {E, nu}")
        mats = {}
    for tag, entry in mats.items():
        try:
            t = int(tag)
        except (TypeError, ValueError):
            r.errors.append(f"materials[{tag}]: phase tag must be an integer")
            continue
        path = f"materials[{t}]"
        if not isinstance(entry, dict):
            r.errors.append(f"{path}: expected a mapping with E and nu")
            continue
        ok = r.require(entry, "E", f"{path}.E") & r.require(entry, "nu", f"{path}.nu")
        E = r.get(entry, "E", float, f"{path}.E", check=lambda v: v > 0, msg="must be positive")
        nu = r.get(entry, "nu", float, f"{path}.nu", check=lambda v: -1 < v < 0.5, msg="must lie in (-1, 0.5)")
        if ok and E is not None and nu is not None:
            materials[t] = Material(E, nu)
    for t in sorted(required_tags(rve.microstructure, physics)):
        if t not in materials and not any(e.startswith(f"materials[{t}]") for e in r.errors):
            r.errors.append(f"materials[{t}]: missing material for phase tag {t}")

    ld = r.section(raw, "load", "load")
    load = LoadConfig(
        F_M=r.get(ld, "F_M", "mat2", "load.F_M", np.eye(2), check=lambda F: np.linalg.det(F) > 0, msg="det F_M must be positive"),
        p_c=r.get(ld, "p_c", float, "load.p_c", 0.0),
        grad_p=r.get(ld, "grad_p", "vec2", "load.grad_p", np.zeros(2)),
        X_c=r.get(ld, "X_c", "vec2", "load.X_c", None),
    )
    fs = r.section(raw, "fsi", "fsi")
    fsi = FsiConfig(
        gamma=r.get(fs, "gamma", float, "fsi.gamma", DEFAULT_GAMMA, check=lambda v: v > 0, msg="must be positive"),
        viscosity=r.get(fs, "viscosity", float, "fsi.viscosity", 1.0, check=lambda v: v > 0, msg="must be positive"),
        tau=r.get(fs, "tau", float, "fsi.tau", None, check=lambda v: v > 0, msg="must be positive"),
    )

    macro = None
    if mode == "fe2-run":
        if "macro" not in raw:
            r.errors.append("macro: missing required section for fe2-run")
        mc = r.section(raw, "macro", "macro")
        macro = MacroConfig(
            nx=r.get(mc, "nx", int, "macro.nx", 2, check=lambda v: v >= 1, msg="must be >= 1"),
            ny=r.get(mc, "ny", int, "macro.ny", 2, check=lambda v: v >= 1, msg="must be >= 1"),
            lx=r.get(mc, "lx", float, "macro.lx", 1.0, check=lambda v: v > 0, msg="must be positive"),
            ly=r.get(mc, "ly", float, "macro.ly", 1.0, check=lambda v: v > 0, msg="must be positive"),
            gauss_order=r.get(mc, "gauss_order", int, "macro.gauss_order", 2, check=lambda q: q in (1, 2), msg="must be 1 or 2"),
        )
        sup = mc.get("supports", []) or []
        if not isinstance(sup, list):
            r.errors.append("macro.supports: expected a list")
            sup = []
        for k, item in enumerate(sup):
            c = _constraint(r, item, f"macro.supports[{k}]", False)
            if c is not None:
                macro.supports.append(c)
        if "load_program" in mc:
            prog = mc["load_program"]
            if not isinstance(prog, list):
                r.errors.append("macro.load_program: expected a list of steps")
                prog = []
            macro.load_program = [_step(r, s, f"macro.load_program[{k}]") for k, s in enumerate(prog)]
        elif "increment" in mc:
            n = r.get(mc, "steps", int, "macro.steps", 1, check=lambda v: v >= 1, msg="must be >= 1")
            inc = _step(r, mc["increment"], "macro.increment")
            macro.load_program = [copy.deepcopy(inc) for _ in range(n)]
        else:
            r.errors.append("macro.load_program: missing (give load_program or steps + increment)")
        pr = r.section(mc, "pressure", "macro.pressure")
        macro.pressure_p0 = r.get(pr, "p0", float, "macro.pressure.p0", 0.0)
        macro.pressure_grad = r.get(pr, "grad", "vec2", "macro.pressure.grad", np.zeros(2))

    cfg = RunConfig(
        mode=mode,
        rve=rve,
        materials=materials,
        load=load,
        fsi=fsi,
        macro=macro,
        tol=r.get(raw, "tol", float, "tol", DEFAULT_TOL, check=lambda v: v > 0, msg="must be positive"),
        max_iter=r.get(raw, "max_iter", int, "max_iter", 25, check=lambda v: v >= 1, msg="must be >= 1"),
        seed=r.get(raw, "seed", int, "seed", 0),
        threads=r.get(raw, "threads", int, "threads", 1, check=lambda v: v >= 1, msg="must be >= 1"),
        cache_dir=r.get(raw, "cache_dir", str, "cache_dir", None),
        raw=raw,
    )
    if r.errors:
        raise ConfigError(r.errors)
    return cfg


def parse_config(path, mode: str | None = None) -> RunConfig:
    """Read a YAML/JSON config file and validate it."""
    p = Path(path)
    try:
        raw = yaml.safe_load(p.read_text())
    except FileNotFoundError:
        raise ConfigError([f"{path}: file not found"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not well-formed YAML/JSON ({exc})"]) from exc
    return build_config(raw if raw is not None else {}, mode)
