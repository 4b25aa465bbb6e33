"""
Rendering a recombined face
===========================

Build a synthetic blendshape model, take the identity of one set of coefficients and the
expression of another, and z-buffer the result under a rotated camera. The colour image,
the binary face mask and the appearance hint (background with the face blanked out) are
written as PPM/PGM files.

    python3 demos/01_render_face.py [output_dir]
"""

import sys
from pathlib import Path

import numpy as np

from faceflow import (CameraPose, Coefficients, TextureMap, appearance_hint, facial_mask,
                      rasterize, recombine, synthetic_face_model)
from faceflow import io as fio

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_output")
rng = np.random.default_rng(0)

model = synthetic_face_model(seed=1)
print(f"model: {model.n_vertices} vertices, {model.n_triangles} triangles, "
      f"K_id={model.k_id}, K_exp={model.k_exp}")

# %%
# Identity from "person A", expression from "person B"
person_a = Coefficients(rng.normal(size=model.k_id), rng.normal(size=model.k_exp))
person_b = Coefficients(rng.normal(size=model.k_id), 2.0 * rng.normal(size=model.k_exp))
mesh = recombine(model, person_a, person_b)

# %%
# Weak-perspective camera: yaw a little, scale model units to pixels, centre in a 128 frame
camera = CameraPose.from_euler(yaw=0.35, pitch=-0.1, scale=45.0, translation=(64.0, 64.0))
texture = TextureMap(rng.uniform(0.3, 1.0, size=(model.n_vertices, 3)))
raster = rasterize(mesh, camera, texture, 128, 128)
mask = facial_mask(raster)
print(f"covered pixels: {int(mask.sum())} of {mask.size}")
print(f"depth range on the face: {raster.depth[raster.mask].min():.3f} .. {raster.depth[raster.mask].max():.3f}")

# %%
# Appearance hint: a stand-in background image with the face region removed
gx, gy = np.meshgrid(np.linspace(0, 1, 128), np.linspace(1, 0, 128))
background = np.dstack([gx, gy, np.full((128, 128), 0.5)])
hint = appearance_hint(background, mask)

for name, img in [("render_color.ppm", raster.color), ("render_mask.pgm", mask), ("render_hint.ppm", hint)]:
    print("wrote", fio.write_image(out / name, img))
