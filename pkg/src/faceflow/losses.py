"""Loss arithmetic for the blending network: appearance, reconstruction, adversarial, total.

L1 terms are means of absolute differences. Nothing here runs a network: the appearance
embedder is any deterministic callable and discriminator outputs arrive as score arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .sampling import Provenance


@dataclass(frozen=True)
class LossWeights:
    adv: float = 10.0
    app: float = 1.0
    rec: float = 10.0
    tmp: float = 5.0

    def __post_init__(self):
        if min(self.adv, self.app, self.rec, self.tmp) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class ScaleScores:
    """Discriminator outputs, one array per scale, for real and generated inputs."""

    real: Sequence[np.ndarray]
    fake: Sequence[np.ndarray]

    def __post_init__(self):
        if len(self.real) != len(self.fake):
            raise ValueError("real and fake score lists differ in length")
        if len(self.fake) == 0:
            raise ValueError("no discriminator scales given")


def _flatten_features(out):
    if isinstance(out, (list, tuple)):
        return [np.asarray(o, dtype=np.float64) for o in out]
    return [np.asarray(out, dtype=np.float64)]


def appearance_loss(extractor: Callable, y: np.ndarray, x_p: np.ndarray) -> float:
    fy = _flatten_features(extractor(y))
    fx = _flatten_features(extractor(x_p))
    if [f.shape for f in fy] != [f.shape for f in fx]:
        raise ValueError("extractor produced different shapes for the two images")
    diff = np.concatenate([np.abs(a - b).ravel() for a, b in zip(fy, fx)])
    return float(diff.mean())


def reconstruction_loss(y: np.ndarray, x_i: np.ndarray, provenance: Provenance | str) -> float:
    """Mean absolute difference for intra-video triplets; exactly 0 for inter-video ones."""
    y = np.asarray(y, dtype=np.float64)
    x_i = np.asarray(x_i, dtype=np.float64)
    if y.shape != x_i.shape:
        raise ValueError(f"shapes differ: {y.shape} vs {x_i.shape}")
    if Provenance(provenance) is Provenance.INTER:
        return 0.0
    return float(np.abs(y - x_i).mean())


def _relu(x):
    return np.maximum(x, 0.0)


def adversarial_loss(scores: ScaleScores, variant: str = "hinge", side: str = "discriminator",
                     prob_eps: float = 1e-12) -> float:
    """Multi-scale adversarial loss averaged over scales.

    ``log``: scores are probabilities. The discriminator minimizes
    ``-(E log D(real) + E log(1 - D(fake)))``; the generator minimizes ``E log(1 - D(fake))``.
    ``hinge``: discriminator ``E relu(1 - real) + E relu(1 + fake)``; generator ``-E fake``.
    """
    if side not in ("generator", "discriminator"):
        raise ValueError(f"unknown side {side!r}")
    per_scale = []
    for real, fake in zip(scores.real, scores.fake):
        real = np.asarray(real, dtype=np.float64)
        fake = np.asarray(fake, dtype=np.float64)
        if variant == "hinge":
            if side == "discriminator":
                per_scale.append(_relu(1.0 - real).mean() + _relu(1.0 + fake).mean())
            else:
                per_scale.append(-fake.mean())
        elif variant == "log":
            log_fake = np.log(np.clip(1.0 - fake, prob_eps, 1.0)).mean()
            if side == "discriminator":
                log_real = np.log(np.clip(real, prob_eps, 1.0)).mean()
                per_scale.append(-(log_real + log_fake))
            else:
                per_scale.append(log_fake)
        else:
            raise ValueError(f"unknown adversarial variant {variant!r}")
    return float(np.mean(per_scale))


def total_loss(adv: float, app: float, rec: float, tmp: float,
               weights: LossWeights = LossWeights(), provenance: Provenance | str | None = None) -> float:
    """Weighted sum of the four terms.

    Passing ``provenance="inter"`` zeroes the reconstruction and temporal terms, which have
    no ground truth for cross-video triplets.
    """
    if provenance is not None and Provenance(provenance) is Provenance.INTER:
        rec = tmp = 0.0
    return weights.adv * adv + weights.app * app + weights.rec * rec + weights.tmp * tmp


class AvgPoolPyramid:
    """Fixed feature extractor: the image and its 2x average-pooled downsamplings."""

    def __init__(self, levels: int = 3):
        if levels < 1:
            raise ValueError("levels must be >= 1")
        self.levels = levels

    def __call__(self, image):
        x = np.asarray(image, dtype=np.float64)
        out = [x]
        for _ in range(self.levels - 1):
            h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
            if h == 0 or w == 0:
                break
            x = x[:h, :w]
            x = 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])
            out.append(x)
        return out
