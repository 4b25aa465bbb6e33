"""Linear blendshape face model, coefficient recombination and weak-perspective projection.

A face shape is ``mean + id_basis @ alpha_id + exp_basis @ alpha_exp`` evaluated per
vertex coordinate. Bases are dense ``(V, 3, K)`` arrays with no orthogonality assumed.

Screen convention used by :func:`project`: x to the right, y downward, origin at the
centre of the top-left pixel. Larger camera-space z is closer to the viewer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._atomic import atomic_write_bytes


class RankMismatchError(ValueError):
    """Coefficient vector length does not match a basis rank."""


class ModelFormatError(ValueError):
    """A model manifest or blob could not be parsed."""


@dataclass(frozen=True)
class BlendshapeModel:
    mean_shape: np.ndarray
    id_basis: np.ndarray
    exp_basis: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean_shape, dtype=np.float64)
        id_basis = np.asarray(self.id_basis, dtype=np.float64)
        exp_basis = np.asarray(self.exp_basis, dtype=np.float64)
        tris = np.asarray(self.triangles, dtype=np.int64)
        if mean.ndim != 2 or mean.shape[1] != 3 or mean.shape[0] < 3:
            raise ValueError(f"mean_shape must be (V>=3, 3), got {mean.shape}")
        n_vert = mean.shape[0]
        for name, basis in (("id_basis", id_basis), ("exp_basis", exp_basis)):
            if basis.ndim != 3 or basis.shape[:2] != (n_vert, 3) or basis.shape[2] < 1:
                raise ValueError(f"{name} must be ({n_vert}, 3, K>=1), got {basis.shape}")
        if tris.ndim != 2 or tris.shape[1] != 3 or tris.shape[0] < 1:
            raise ValueError(f"triangles must be (T>=1, 3), got {tris.shape}")
        if tris.min() < 0 or tris.max() >= n_vert:
            raise ValueError("triangle index out of range")
        if np.any((tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])):
            raise ValueError("triangle repeats a vertex index")
        for name, arr in (("mean_shape", mean), ("id_basis", id_basis),
                          ("exp_basis", exp_basis), ("triangles", tris)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return self.mean_shape.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def k_id(self) -> int:
        return self.id_basis.shape[2]

    @property
    def k_exp(self) -> int:
        return self.exp_basis.shape[2]

    def zero_coefficients(self) -> "Coefficients":
        return Coefficients(np.zeros(self.k_id), np.zeros(self.k_exp))


@dataclass(frozen=True)
class Coefficients:
    alpha_id: np.ndarray
    alpha_exp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha_id", np.asarray(self.alpha_id, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "alpha_exp", np.asarray(self.alpha_exp, dtype=np.float64).reshape(-1))


@dataclass(frozen=True)
class CameraPose:
    """Weak-perspective camera: rotate, drop z into the depth channel, scale and shift x/y."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    scale: float = 1.0

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), rtol=0.0, atol=1e-6):
            raise ValueError("rotation is not orthonormal")
        if trans.shape != (2,):
            raise ValueError(f"translation must be a 2-vector, got {trans.shape}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def from_euler(cls, yaw=0.0, pitch=0.0, roll=0.0, scale=1.0, translation=(0.0, 0.0)):
        """Build a pose from angles in radians (yaw about y, pitch about x, roll about z)."""
        return cls(euler_rotation(yaw, pitch, roll), np.asarray(translation, dtype=np.float64), scale)


def euler_rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return rz @ rx @ ry


@dataclass(frozen=True)
class Mesh3D:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValueError(f"vertices must be (V, 3), got {verts.shape}")
        if not np.all(np.isfinite(verts)):
            raise ValueError("mesh vertices must be finite")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64))


@dataclass(frozen=True)
class TextureMap:
    colors: np.ndarray

    def __post_init__(self):
        colors = np.asarray(self.colors, dtype=np.float64)
        if colors.ndim != 2 or colors.shape[1] != 3:
            raise ValueError(f"texture must be (V, 3), got {colors.shape}")
        if np.any(~np.isfinite(colors)) or colors.min() < 0.0 or colors.max() > 1.0:
            raise ValueError("texture colors must lie in [0, 1]")
        object.__setattr__(self, "colors", colors)

    @classmethod
    def constant(cls, n_vertices: int, rgb=(1.0, 1.0, 1.0)) -> "TextureMap":
        return cls(np.tile(np.asarray(rgb, dtype=np.float64), (n_vertices, 1)))


def _check_coefficients(model: BlendshapeModel, coeffs: Coefficients, label: str = "coefficients"):
    if coeffs.alpha_id.shape[0] != model.k_id:
        raise RankMismatchError(f"{label}: alpha_id has {coeffs.alpha_id.shape[0]} entries, model K_id={model.k_id}")
    if coeffs.alpha_exp.shape[0] != model.k_exp:
        raise RankMismatchError(f"{label}: alpha_exp has {coeffs.alpha_exp.shape[0]} entries, model K_exp={model.k_exp}")


def _combine(model, alpha_id, alpha_exp):
    return model.mean_shape + model.id_basis @ alpha_id + model.exp_basis @ alpha_exp


def reconstruct_shape(model: BlendshapeModel, coeffs: Coefficients) -> Mesh3D:
    _check_coefficients(model, coeffs)
    return Mesh3D(_combine(model, coeffs.alpha_id, coeffs.alpha_exp), model.triangles)


def recombine(model: BlendshapeModel, id_coeffs: Coefficients, exp_coeffs: Coefficients) -> Mesh3D:
    """Identity from one source, expression from another."""
    _check_coefficients(model, id_coeffs, "id_coeffs")
    _check_coefficients(model, exp_coeffs, "exp_coeffs")
    return Mesh3D(_combine(model, id_coeffs.alpha_id, exp_coeffs.alpha_exp), model.triangles)


def project(mesh: Mesh3D | np.ndarray, camera: CameraPose) -> np.ndarray:
    """Return ``(V, 3)`` rows of (screen x, screen y, camera z); z is not scaled."""
    verts = mesh.vertices if isinstance(mesh, Mesh3D) else np.asarray(mesh, dtype=np.float64)
    rotated = verts @ camera.rotation.T
    out = np.empty_like(rotated)
    out[:, :2] = camera.scale * rotated[:, :2] + camera.translation
    out[:, 2] = rotated[:, 2]
    return out


# --- model files -------------------------------------------------------------------

_MANIFEST_KEYS = ("V", "T", "K_id", "K_exp")


def save_model(model: BlendshapeModel, path) -> tuple[Path, Path]:
    """Write ``<stem>.bsm`` manifest and ``<stem>.bin`` blob; returns both paths."""
    path = Path(path)
    manifest_path = path.with_suffix(".bsm")
    blob_path = path.with_suffix(".bin")
    blob = b"".join([
        np.ascontiguousarray(model.mean_shape, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.id_basis, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.exp_basis, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.triangles, dtype="<i4").tobytes(),
    ])
    header = (
        "format blendshape-model 1\n"
        f"V {model.n_vertices}\n"
        f"T {model.n_triangles}\n"
        f"K_id {model.k_id}\n"
        f"K_exp {model.k_exp}\n"
        f"blob {blob_path.name}\n"
    )
    atomic_write_bytes(blob_path, blob)
    atomic_write_bytes(manifest_path, header.encode("ascii"))
    return manifest_path, blob_path


def load_model(path) -> BlendshapeModel:
    manifest_path = Path(path).with_suffix(".bsm")
    header = {}
    for raw in manifest_path.read_text(encoding="ascii").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        header[key] = value.strip()
    try:
        n_vert, n_tri, k_id, k_exp = (int(header[k]) for k in _MANIFEST_KEYS)
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{manifest_path}: bad or missing header field ({exc})") from None
    blob_path = manifest_path.parent / header.get("blob", manifest_path.with_suffix(".bin").name)
    data = blob_path.read_bytes()

    sizes = [n_vert * 3, n_vert * 3 * k_id, n_vert * 3 * k_exp]
    expected = 8 * sum(sizes) + 4 * n_tri * 3
    if len(data) != expected:
        raise ModelFormatError(f"{blob_path}: expected {expected} bytes, found {len(data)}")
    offset = 0
    parts = []
    for count in sizes:
        parts.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64))
        offset += 8 * count
    tris = np.frombuffer(data, dtype="<i4", count=n_tri * 3, offset=offset).astype(np.int64)
    return BlendshapeModel(
        parts[0].reshape(n_vert, 3),
        parts[1].reshape(n_vert, 3, k_id),
        parts[2].reshape(n_vert, 3, k_exp),
        tris.reshape(n_tri, 3),
    )


# --- synthetic models ----------------------------------------------------------------

def grid_triangles(nx: int, ny: int) -> np.ndarray:
    """Two triangles per cell of an ``nx`` by ``ny`` vertex lattice (row-major vertices)."""
    idx = np.arange(nx * ny).reshape(ny, nx)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, :-1].ravel()
    d = idx[1:, 1:].ravel()
    return np.concatenate([np.stack([a, b, c], 1), np.stack([b, d, c], 1)])


def synthetic_face_model(nx: int = 24, ny: int = 28, k_id: int = 8, k_exp: int = 6,
                         seed: int = 0) -> BlendshapeModel:
    """A dome-shaped lattice with smooth random bases, as a stand-in for a real face model.

    Model units: x in [-1, 1], y in [-1.2, 1.2] (y downward), z up to about 0.8 at the centre.
    """
    rng = np.random.default_rng(seed)
    xs = np.linspace(-1.0, 1.0, nx)
    ys = np.linspace(-1.2, 1.2, ny)
    gx, gy = np.meshgrid(xs, ys)
    r2 = gx**2 + (gy / 1.2) ** 2
    gz = 0.8 * np.sqrt(np.clip(1.0 - 0.6 * r2, 0.0, None))
    mean = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], 1)

    def smooth_basis(k, amplitude):
        basis = np.empty((nx * ny, 3, k))
        for col in range(k):
            fx, fy = rng.uniform(0.5, 2.5, size=2)
            phase = rng.uniform(0, 2 * np.pi, size=3)
            weights = rng.normal(size=3) * amplitude * np.array([0.3, 0.3, 1.0])
            wave = np.cos(np.pi * (fx * gx + fy * gy)[..., None] + phase)
            basis[:, :, col] = (wave * weights).reshape(-1, 3)
        return basis

    return BlendshapeModel(mean, smooth_basis(k_id, 0.05), smooth_basis(k_exp, 0.03),
                           grid_triangles(nx, ny))


def random_model(rng: np.random.Generator, n_vertices=3, n_triangles=1, k_id=2, k_exp=2) -> BlendshapeModel:
    """Small unstructured model with Gaussian mean and bases (for tests)."""
    tris = np.array([rng.choice(n_vertices, size=3, replace=False) for _ in range(n_triangles)])
    return BlendshapeModel(
        rng.normal(size=(n_vertices, 3)),
        rng.normal(size=(n_vertices, 3, k_id)),
        rng.normal(size=(n_vertices, 3, k_exp)),
        tris,
    )


__all__ = [
    "BlendshapeModel", "Coefficients", "CameraPose", "Mesh3D", "TextureMap",
    "RankMismatchError", "ModelFormatError", "reconstruct_shape", "recombine", "project",
    "euler_rotation", "save_model", "load_model", "grid_triangles", "synthetic_face_model",
    "random_model",
]
