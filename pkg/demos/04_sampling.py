"""
Choosing training triplets
==========================

Each training step draws three consecutive-frame pairs (appearance, identity,
expression). With probability sigma they all come from one video, otherwise from three
different videos. This sweeps sigma and shows the realised intra rate and how the video
slots spread over a small collection.
"""

from faceflow.sampling import DatasetManifest, make_rng, sample, sample_stats

manifest = DatasetManifest.from_frame_counts([120, 45, 300, 80, 12, 64])
print(f"{len(manifest)} videos, frame counts {[v.frames for v in manifest.videos]}")

for sigma in (0.0, 0.2, 0.5, 0.8, 1.0):
    stats = sample_stats(manifest, sigma, seed=0, count=10_000)
    print(f"sigma={sigma:.1f}  intra fraction {stats['intra_fraction']:.4f}  slots per video {stats['histogram']}")

# %%
# A few concrete triplets
rng = make_rng(42)
for _ in range(4):
    trip = sample(manifest, 0.5, rng)
    refs = ", ".join(f"v{p.video}:({p.prev_frame},{p.frame})" for p in trip.pairs)
    print(f"{trip.provenance.value:5s}  {refs}")
