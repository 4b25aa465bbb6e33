"""JSON scene descriptions: a model file plus per-frame coefficients and cameras.

Example::

    {
      "model": "face.bsm",
      "width": 128, "height": 128, "seed": 0,
      "texture": "random",
      "frames": [
        {"alpha_id": [0.1, 0.0], "alpha_exp": [0.0],
         "camera": {"euler": [0.1, 0.0, 0.0], "scale": 50, "translation": [64, 64]}}
      ]
    }

Relative model paths resolve against the config file's directory. ``texture`` is
``"white"``, ``"random"`` (per-vertex colours from ``seed``) or a ``(V, 3)`` list.
Missing coefficient vectors are zeros.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .morphable_model import (BlendshapeModel, CameraPose, Coefficients, TextureMap, load_model,
                              project, reconstruct_shape)
from .rasterizer import RasterOutput, rasterize_projected
from .temporal_flow import FramePairGeometry


class SceneError(ValueError):
    pass


@dataclass
class FrameSpec:
    coeffs: Coefficients
    camera: CameraPose


@dataclass
class SceneConfig:
    model: BlendshapeModel
    frames: list[FrameSpec]
    width: int
    height: int
    texture: TextureMap
    seed: int = 0

    def projected(self, k: int) -> np.ndarray:
        frame = self.frames[k]
        return project(reconstruct_shape(self.model, frame.coeffs), frame.camera)

    def render(self, k: int) -> tuple[np.ndarray, RasterOutput]:
        proj = self.projected(k)
        return proj, rasterize_projected(proj, self.model.triangles, self.texture.colors,
                                         self.width, self.height)

    def frame_pair(self, t: int) -> FramePairGeometry:
        if not 1 <= t < len(self.frames):
            raise SceneError(f"frame index {t} needs a predecessor and must be < {len(self.frames)}")
        proj_t, raster_t = self.render(t)
        proj_prev, raster_prev = self.render(t - 1)
        return FramePairGeometry(raster_t, raster_prev, proj_t, proj_prev, self.model.triangles)


def _camera(obj) -> CameraPose:
    scale = float(obj.get("scale", 1.0))
    translation = obj.get("translation", [0.0, 0.0])
    if "rotation" in obj:
        return CameraPose(np.asarray(obj["rotation"]), np.asarray(translation), scale)
    yaw, pitch, roll = obj.get("euler", [0.0, 0.0, 0.0])
    return CameraPose.from_euler(yaw, pitch, roll, scale, translation)


def _texture(spec, n_vertices, seed) -> TextureMap:
    if spec is None or spec == "white":
        return TextureMap.constant(n_vertices)
    if spec == "random":
        return TextureMap(np.random.Generator(np.random.PCG64(seed)).uniform(0.2, 1.0, (n_vertices, 3)))
    return TextureMap(np.asarray(spec, dtype=np.float64))


def scene_from_dict(obj: dict, base_dir=".", model: BlendshapeModel | None = None) -> SceneConfig:
    try:
        if model is None:
            model_path = Path(obj["model"])
            if not model_path.is_absolute():
                model_path = Path(base_dir) / model_path
            model = load_model(model_path)
        frames = []
        for f in obj["frames"]:
            coeffs = Coefficients(f.get("alpha_id", np.zeros(model.k_id)),
                                  f.get("alpha_exp", np.zeros(model.k_exp)))
            frames.append(FrameSpec(coeffs, _camera(f.get("camera", {}))))
        width, height = int(obj["width"]), int(obj["height"])
        seed = int(obj.get("seed", 0))
    except KeyError as exc:
        raise SceneError(f"scene config is missing {exc}") from None
    if not frames:
        raise SceneError("scene config lists no frames")
    if width < 1 or height < 1:
        raise SceneError("resolution must be positive")
    return SceneConfig(model, frames, width, height, _texture(obj.get("texture"), model.n_vertices, seed), seed)


def load_scene(path) -> SceneConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: invalid JSON ({exc})") from None
    return scene_from_dict(obj, base_dir=path.parent)
