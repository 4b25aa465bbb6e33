"""Dynamic training sample selection across a video collection.

With probability ``sigma`` a triplet of consecutive-frame pairs is drawn from one video
(intra); otherwise each of the three pairs comes from a different video (inter). Frame
indices are 1-based, so the time-t frame ``l`` lies in ``[2, L_n]`` and its predecessor is
``l - 1``. Video indices are 0-based positions in the manifest.

Randomness comes from :class:`numpy.random.Generator` over the PCG64 bit generator, seeded
explicitly, so a (manifest, sigma, seed) triple always yields the same stream.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ManifestError(ValueError):
    pass


class InsufficientVideosError(ValueError):
    pass


class Provenance(str, enum.Enum):
    INTRA = "intra"
    INTER = "inter"


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    frames: int
    template: str = ""

    def frame_path(self, frame: int) -> str:
        return self.template.format(id=self.video_id, frame=frame)


@dataclass(frozen=True)
class DatasetManifest:
    videos: tuple[VideoEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "videos", tuple(self.videos))
        if not self.videos:
            raise ManifestError("manifest lists no videos")
        for v in self.videos:
            if v.frames < 2:
                raise ManifestError(f"video {v.video_id!r} has {v.frames} frames; need >= 2")

    def __len__(self):
        return len(self.videos)

    @classmethod
    def from_frame_counts(cls, counts, template="{id}/{frame:05d}.png") -> "DatasetManifest":
        return cls([VideoEntry(f"v{n}", int(c), template) for n, c in enumerate(counts)])

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        obj = json.loads(text)
        try:
            entries = [VideoEntry(str(v["id"]), int(v["frames"]), str(v.get("template", "")))
                       for v in obj["videos"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"malformed manifest: {exc}") from None
        return cls(entries)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def to_json(self) -> str:
        return json.dumps({"videos": [{"id": v.video_id, "frames": v.frames, "template": v.template}
                                      for v in self.videos]})


@dataclass(frozen=True)
class FramePair:
    video: int
    frame: int  # time-t frame; its predecessor is frame - 1

    @property
    def prev_frame(self) -> int:
        return self.frame - 1


@dataclass(frozen=True)
class SampleTriplet:
    appearance: FramePair  # X_p
    identity: FramePair    # X_i
    expression: FramePair  # X_e
    provenance: Provenance

    @property
    def pairs(self) -> tuple[FramePair, FramePair, FramePair]:
        return (self.appearance, self.identity, self.expression)

    def frames(self):
        """The six (video, frame) references: t-frames first, then the t-1 frames."""
        return ([(p.video, p.frame) for p in self.pairs]
                + [(p.video, p.prev_frame) for p in self.pairs])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _frame(rng, manifest, video):
    return int(rng.integers(2, manifest.videos[video].frames + 1))


def sample(manifest: DatasetManifest, sigma: float, rng: np.random.Generator) -> SampleTriplet:
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must be in [0, 1], got {sigma}")
    n_videos = len(manifest)
    if sigma < 1.0 and n_videos < 3:
        raise InsufficientVideosError(f"inter-video sampling needs 3 videos, manifest has {n_videos}")

    if rng.random() < sigma:
        n = int(rng.integers(n_videos))
        pairs = [FramePair(n, _frame(rng, manifest, n)) for _ in range(3)]
        return SampleTriplet(*pairs, Provenance.INTRA)

    while True:
        videos = rng.integers(n_videos, size=3)
        if len(set(videos.tolist())) == 3:
            break
    pairs = [FramePair(int(n), _frame(rng, manifest, int(n))) for n in videos]
    return SampleTriplet(*pairs, Provenance.INTER)


def sample_stream(manifest: DatasetManifest, sigma: float, seed: int, count: int):
    rng = make_rng(seed)
    for _ in range(count):
        yield sample(manifest, sigma, rng)


def sample_stats(manifest: DatasetManifest, sigma: float, seed: int, count: int) -> dict:
    """Intra fraction and per-video slot histogram over ``count`` seeded draws.

    Each triplet fills three video slots, so the histogram sums to ``3 * count``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    hist = np.zeros(len(manifest), dtype=np.int64)
    intra = 0
    for trip in sample_stream(manifest, sigma, seed, count):
        intra += trip.provenance is Provenance.INTRA
        for p in trip.pairs:
            hist[p.video] += 1
    return {
        "count": count,
        "sigma": sigma,
        "seed": seed,
        "intra_fraction": intra / count,
        "histogram": hist.tolist(),
    }
