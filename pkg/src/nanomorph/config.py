"""Flat ``key = value`` run configuration with dotted section prefixes.

Unknown keys are rejected and every parameter object is rebuilt (and so
re-validated) at load time.  Shipped presets live in ``nanomorph/presets``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Optional

import numpy as np

from .fit import LatticeSpec, Weights, derive_lambda_d
from .marks import GammaMarkParams
from .micro import DEFAULT_CLASSES, BoundaryConfig, InfeasibleError, InteriorParams, OuterParams
from .physics import DiffusionParams
from .pointproc import SQRT2_HALF, ChainParams, MaternParams


class ConfigError(ValueError):
    pass


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _triple(text):
    parts = [float(v) for v in text.split(":")]
    if len(parts) != 3:
        raise ValueError(f"expected min:max:step, got {text!r}")
    return tuple(parts)


def _classes(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        lo, hi, lam = (float(v) for v in item.split(":"))
        out.append((lo, hi, lam))
    return tuple(out)


def _format_classes(classes):
    return ", ".join(f"{lo:g}:{hi:g}:{lam!r}" for lo, hi, lam in classes)


# key -> (parser, default); a default of None means "unset"
SCHEMA = {
    "seed": (int, 0),
    "window.nx": (int, 300),
    "window.ny": (int, 300),
    "window.nz": (int, 80),
    "window.voxel_size_nm": (float, 0.71),
    "window.margin": (float, 0.0),
    "macro.lambda_c": (float, None),
    "macro.lambda_d": (float, None),
    "macro.lambda_hat": (float, None),
    "macro.a": (float, None),
    "macro.b": (float, None),
    "macro.p": (float, None),
    "macro.r_min": (float, SQRT2_HALF),
    "macro.r_max": (float, 1.5),
    "macro.displacement": (str, "discrete"),
    "macro.k": (float, None),
    "macro.theta": (float, None),
    "macro.m": (int, 4),
    "micro.enabled": (_bool, True),
    "micro.outer.classes": (_classes, None),
    "micro.outer.alpha": (float, 0.0),
    "micro.outer.beta": (float, 0.0),
    "micro.outer.sigma2": (float, 0.0),
    "micro.boundary.n_shells": (int, 0),
    "micro.interior.r": (float, 1.0),
    "micro.interior.lambda_h": (float, 0.0),
    "physics.D": (float, 1.8e-7),
    "physics.tau": (float, 400e-12),
    "physics.g": (float, 1e27),
    "physics.tol": (float, 1e-3),
    "physics.max_iters": (int, 20000),
    "fit.lambda_c": (_triple, None),
    "fit.a": (_triple, None),
    "fit.b": (_triple, None),
    "fit.p": (_triple, None),
    "fit.reps": (int, 3),
    "fit.w_scd": (float, 0.25),
    "fit.w_x": (float, 1 / 12),
    "fit.w_y": (float, 1 / 12),
    "fit.w_z": (float, 1 / 12),
    "fit.w_v": (float, 0.25),
    "fit.w_vprime": (float, 0.25),
}


def parse_text(text: str) -> Dict[str, object]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


@dataclass
class RunConfig:
    values: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.values) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        try:
            self.validate()
        except (ConfigError, InfeasibleError):
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def get(self, key):
        if key in self.values:
            return self.values[key]
        return SCHEMA[key][1]

    def has(self, key) -> bool:
        return self.get(key) is not None

    def set(self, key, value) -> "RunConfig":
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        vals = dict(self.values)
        vals[key] = value
        return RunConfig(vals)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(parse_text(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        lines = []
        for key in SCHEMA:
            if key not in self.values:
                continue
            val = self.values[key]
            if key == "micro.outer.classes":
                text = _format_classes(val)
            elif isinstance(val, tuple):
                text = ":".join(repr(float(v)) for v in val)
            elif isinstance(val, bool):
                text = "true" if val else "false"
            elif isinstance(val, float):
                text = repr(val)
            else:
                text = str(val)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    # -- typed views ---------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.get("seed"))

    @property
    def window(self):
        return (self.get("window.nx"), self.get("window.ny"), self.get("window.nz"))

    @property
    def voxel_size(self) -> float:
        return float(self.get("window.voxel_size_nm"))

    def has_macro(self) -> bool:
        return all(self.has(k) for k in ("macro.lambda_c", "macro.a", "macro.b", "macro.p")) and (
            self.has("macro.lambda_d") or self.has("macro.lambda_hat"))

    @property
    def lambda_hat(self) -> Optional[float]:
        if self.has("macro.lambda_hat"):
            return float(self.get("macro.lambda_hat"))
        if self.has_macro():
            return self.matern().intensity
        return None

    def matern(self) -> MaternParams:
        lc, a, b = self.get("macro.lambda_c"), self.get("macro.a"), self.get("macro.b")
        if self.has("macro.lambda_d"):
            ld = self.get("macro.lambda_d")
        else:
            ld = derive_lambda_d(self.get("macro.lambda_hat"), lc, a, b)
        return MaternParams(lc, ld, a, b)

    def chain(self) -> ChainParams:
        return ChainParams.for_matern(self.matern(), self.get("macro.p"),
                                      r_min=self.get("macro.r_min"), r_max=self.get("macro.r_max"),
                                      displacement=self.get("macro.displacement"))

    def gamma(self) -> GammaMarkParams:
        return GammaMarkParams(self.get("macro.k"), self.get("macro.theta"), self.get("macro.m"))

    @property
    def micro_enabled(self) -> bool:
        return bool(self.get("micro.enabled"))

    def outer(self) -> OuterParams:
        classes = self.get("micro.outer.classes")
        if classes is None:
            classes = tuple((lo, hi, 0.0) for lo, hi in DEFAULT_CLASSES)
        return OuterParams(classes, self.get("micro.outer.alpha"), self.get("micro.outer.beta"),
                           self.get("micro.outer.sigma2"))

    def boundary(self) -> BoundaryConfig:
        return BoundaryConfig(self.get("micro.boundary.n_shells"))

    def interior(self) -> InteriorParams:
        return InteriorParams(self.get("micro.interior.r"), self.get("micro.interior.lambda_h"))

    def diffusion(self) -> DiffusionParams:
        return DiffusionParams(self.get("physics.D"), self.get("physics.tau"), self.get("physics.g"),
                               self.voxel_size, self.get("physics.tol"),
                               self.get("physics.max_iters"))

    def weights(self) -> Weights:
        return Weights(*(self.get(f"fit.{w}") for w in
                         ("w_scd", "w_x", "w_y", "w_z", "w_v", "w_vprime")))

    def lattice(self) -> LatticeSpec:
        axes = [self.get(f"fit.{k}") for k in ("lambda_c", "a", "b", "p")]
        if any(v is None for v in axes):
            if not self.has_macro():
                raise ConfigError("fit lattice needs fit.* bounds or a macro section to centre on")
            m = self.matern()
            # default: +-50 % around the configured parameters, 5 values per axis
            centre = (m.lambda_c, m.a, m.b, self.get("macro.p"))
            defaults = []
            for i, c in enumerate(centre):
                if i == 3:
                    half = 0.5 * (1 - c)
                else:
                    half = 0.5 * c
                defaults.append((c - half, c + half * (1 + 1e-12), half / 2))
            axes = [ax if ax is not None else d for ax, d in zip(axes, defaults)]
        return LatticeSpec(*axes, reps=self.get("fit.reps"))

    def validate(self):
        for key in ("window.nx", "window.ny", "window.nz"):
            if self.get(key) < 1:
                raise ConfigError(f"{key} must be positive")
        if not self.voxel_size > 0:
            raise ConfigError("window.voxel_size_nm must be positive")
        if self.get("seed") < 0 or self.get("seed") >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.has_macro():
            self.chain()
        if self.has("macro.k") or self.has("macro.theta"):
            self.gamma()
        self.outer()
        self.boundary()
        self.interior()
        self.diffusion()
        self.weights()
        if any(self.has(f"fit.{k}") for k in ("lambda_c", "a", "b", "p")):
            self.lattice()


PRESETS = ("57nm", "100nm", "167nm")


def preset_text(name: str) -> str:
    key = name if name.endswith("nm") else f"{name}nm"
    if key not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("nanomorph.presets").joinpath(f"{key}.cfg").read_text()


def load_preset(name: str) -> RunConfig:
    return RunConfig.from_text(preset_text(name))


def lambda_hat_of(config: RunConfig) -> float:
    lam = config.lambda_hat
    if lam is None or not np.isfinite(lam):
        raise ConfigError("need macro.lambda_hat or a full macro section")
    return lam
