"""
Putting the objective together
==============================

The generator objective weighs an adversarial term, an appearance term on embedded
features, a pixel reconstruction term and the temporal term. Inter-video triplets have
no ground truth frame, so reconstruction and temporal terms drop out.
"""

import numpy as np

from faceflow.losses import (AvgPoolPyramid, LossWeights, ScaleScores, adversarial_loss,
                             appearance_loss, reconstruction_loss, total_loss)

rng = np.random.default_rng(5)
y = rng.random((32, 32, 3))
x_p = np.clip(y + rng.normal(0, 0.05, y.shape), 0, 1)
x_i = np.clip(y + rng.normal(0, 0.10, y.shape), 0, 1)

scores = ScaleScores(real=[rng.normal(1.2, 0.3, 16), rng.normal(1.0, 0.3, 4)],
                     fake=[rng.normal(-0.4, 0.3, 16), rng.normal(-0.6, 0.3, 4)])
adv = adversarial_loss(scores, "hinge", "generator")
app = appearance_loss(AvgPoolPyramid(3), y, x_p)
tmp = 0.004  # from the temporal loss of a warped frame pair, see 02_flow_and_warp.py

w = LossWeights()
print(f"weights adv={w.adv} app={w.app} rec={w.rec} tmp={w.tmp}")
print(f"hinge discriminator side: {adversarial_loss(scores, 'hinge', 'discriminator'):.4f}")
for mode in ("intra", "inter"):
    rec = reconstruction_loss(y, x_i, mode)
    total = total_loss(adv, app, rec, tmp, w, provenance=mode)
    print(f"{mode}: adv {adv:.4f}  app {app:.4f}  rec {rec:.4f}  total {total:.4f}")
print("unit components:", total_loss(1, 1, 1, 1))
