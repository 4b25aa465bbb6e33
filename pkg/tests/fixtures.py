"""Small hand-built scenes shared by several test modules."""

import json

import numpy as np

from faceflow.cli import main
from faceflow.morphable_model import CameraPose, grid_triangles, project, synthetic_face_model
from faceflow.temporal_flow import FramePairGeometry


def plane_z(xy, a=0.03, b=-0.02, c=1.0):
    return a * xy[:, 0] + b * xy[:, 1] + c


def planar_grid(n=9, spacing=4.0, origin=(2.0, 2.0)):
    """Vertices of an ``n`` by ``n`` lattice in screen space on a tilted plane."""
    gx, gy = np.meshgrid(np.arange(n) * spacing + origin[0], np.arange(n) * spacing + origin[1])
    xy = np.column_stack([gx.ravel(), gy.ravel()])
    return np.column_stack([xy, plane_z(xy)]), grid_triangles(n, n)


def translated_plane_pair(dx, dy, size=40, n=9, spacing=4.0):
    """Planar lattice at frame t and the same lattice shifted back by (dx, dy) at t-1."""
    v_t, tris = planar_grid(n, spacing)
    v_prev = v_t - [dx, dy, 0.0]
    return FramePairGeometry.from_projected(v_t, v_prev, tris, size, size)


def translated_face_pair(dx, dy, size=64):
    model = synthetic_face_model(16, 18, 2, 2, seed=4)
    cam = CameraPose(scale=size * 0.35, translation=(size / 2, size / 2))
    v_prev = project(model.mean_shape, cam)
    v_t = v_prev + [dx, dy, 0.0]
    return FramePairGeometry.from_projected(v_t, v_prev, model.triangles, size, size)


def random_flow_scene(seed, n_tri=20, size=64):
    """Random triangle soup at t-1 with every vertex jittered for frame t."""
    rng = np.random.default_rng(seed)
    v_prev = np.column_stack([
        rng.uniform(-6, size + 6, 30), rng.uniform(-6, size + 6, 30), rng.uniform(0.0, 10.0, 30)])
    v_t = v_prev + np.column_stack([rng.normal(0, 1.5, 30), rng.normal(0, 1.5, 30), rng.normal(0, 0.5, 30)])
    tris = np.array([rng.choice(30, 3, replace=False) for _ in range(n_tri)])
    return v_t, v_prev, tris


def write_scene(tmp_path, offsets, size=32, name="scene.json", seed=0):
    """Scene over a small synthetic model; one frame per (dx, dy) camera offset."""
    model_dir = tmp_path / "model"
    if not (model_dir / "face.bsm").exists():
        assert main(["make-model", "--out", str(model_dir / "face"), "--nx", "10", "--ny", "12",
                     "--k-id", "3", "--k-exp", "2"]) == 0
    frames = [{"alpha_id": [0.2, -0.1, 0.0], "alpha_exp": [0.1, 0.0],
               "camera": {"euler": [0.1, 0.05, 0.0], "scale": size * 0.35,
                          "translation": [size / 2 + dx, size / 2 + dy]}} for dx, dy in offsets]
    cfg = {"model": "model/face.bsm", "width": size, "height": size, "seed": seed,
           "texture": "random", "frames": frames}
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path
