"""Flat ``key = value`` configuration files and their mapping onto dataclasses."""

from __future__ import annotations

import math
from pathlib import Path

from .dataset import DatasetConfig
from .errors import LidarLocError, ParseError
from .model import LossWeights
from .projector import CameraIntrinsics, ClipPlanes
from .scene import SceneConfig
from .se3 import PerturbBounds
from .training import TrainConfig


class ConfigError(LidarLocError):
    pass


DEFAULTS = {
    # scene
    "extent": "20,10,3",
    "pillar_spacing": "5.0",
    "pillar_radius": "0.3",
    "wall_thickness": "0.2",
    "density": "200",
    "beam_count": "16",
    "azimuth_step_deg": "0.4",
    "scan_spacing": "4.0",
    # camera
    "fx": "120", "fy": "120", "cx": "80", "cy": "60", "width": "160", "height": "120",
    "near": "0.3", "far": "50",
    "splat_radius": "1",
    "inpaint_iterations": "1",
    # augmentation
    "n_frames": "40",
    "max_rotation_deg": "5",
    "max_translation": "0.5",
    "samples_per_frame": "50",
    "split": "0.6,0.3,0.1",
    # training
    "batch_size": "16",
    "epochs": "60",
    "lr": "1e-3",
    "warmup_epochs": "10",
    "alpha1": "100",
    "alpha2": "1",
    "alpha3": "0.1",
    "value_target": "prediction",
    "use_value": "true",
    # inference
    "max_iters": "10",
    "tol": "0.01",
    # baseline
    "bins": "16",
    "blur_sigma": "1.0",
    "grid_extent": "1.0",
    "grid_step": "0.1",
    "edges": "true",
    "baseline_inpaint_iterations": "0",
    "depth_render": "points",
    # gradcheck
    "gradcheck_seeds": "1",
}


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment; later keys win."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{source}: expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{source}: empty key", lineno)
        out[key] = value
    return out


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


class Config:
    """Layered string settings with typed accessors."""

    def __init__(self, values=None):
        self.values = dict(DEFAULTS)
        if values:
            self.values.update(values)

    def update(self, values):
        self.values.update({k: str(v) for k, v in values.items() if v is not None})

    def require(self, key):
        value = self.values.get(key)
        if value in (None, ""):
            raise ConfigError(f"missing required key '{key}'")
        return value

    def get(self, key, default=None):
        return self.values.get(key, default)

    def _typed(self, key, fn):
        raw = self.require(key)
        try:
            return fn(raw)
        except ValueError:
            raise ConfigError(f"bad value for '{key}': {raw!r}") from None

    def float(self, key):
        return self._typed(key, float)

    def int(self, key):
        return self._typed(key, int)

    def bool(self, key):
        def parse(v):
            if v.lower() in ("1", "true", "yes", "on"):
                return True
            if v.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(v)
        return self._typed(key, parse)

    def floats(self, key):
        return self._typed(key, lambda v: tuple(float(x) for x in v.split(",")))

    # dataclass views
    def scene(self, seed):
        try:
            return SceneConfig(self.floats("extent"), self.float("pillar_spacing"),
                               self.float("pillar_radius"), self.float("wall_thickness"),
                               self.float("density"), self.int("beam_count"), seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def camera(self):
        return CameraIntrinsics(self.float("fx"), self.float("fy"), self.float("cx"),
                                self.float("cy"), self.int("width"), self.int("height"))

    def clip(self):
        return ClipPlanes(self.float("near"), self.float("far"))

    def bounds(self):
        return PerturbBounds(math.radians(self.float("max_rotation_deg")),
                             self.float("max_translation"), self.int("samples_per_frame"))

    def dataset(self, seed):
        return DatasetConfig(self.scene(seed), self.camera(), self.clip(), self.bounds(),
                             self.int("n_frames"), math.radians(self.float("azimuth_step_deg")),
                             self.float("scan_spacing"), self.int("splat_radius"),
                             self.int("inpaint_iterations"), seed)

    def train(self, seed):
        return TrainConfig(batch_size=self.int("batch_size"), epochs=self.int("epochs"),
                           lr=self.float("lr"), warmup_epochs=self.int("warmup_epochs"),
                           fractions=self.floats("split"), seed=seed,
                           use_value=self.bool("use_value"),
                           value_target=self.require("value_target"))

    def weights(self):
        return LossWeights(self.float("alpha1"), self.float("alpha2"), self.float("alpha3"))
