"""Region-aware conditional normalization (RCN).

For a decoder feature ``U`` (C, H, W), an appearance feature ``T`` of the same shape and a
binary face mask ``H`` (H, W), with ``Hb = 1 - H``::

    RCN = alpha * X(U*H, T*Hb) + beta * X(T*Hb, U*H) + (1 - alpha) * U*H + (1 - beta) * T*Hb

where ``X(A, B) = sigma(B) * (A - mu(A)) / sigma(A) + mu(B)`` uses channel moments taken over
each argument's own region only, and is written onto A's region. ``alpha``/``beta`` are
per-channel weights in [0, 1].

Moments are per instance, population standard deviation floored at ``EPS_STD``; no gradient
flows through a floored deviation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._atomic import atomic_write_bytes

EPS_STD = 1e-5
ALPHA_INIT = 0.8
BETA_INIT = 0.1

MODES = ("full", "cross_only", "same_only", "facial_only", "nonfacial_only", "adain", "spade_like")


class EmptyRegionError(ValueError):
    """Moments were requested over a region with no active pixel."""


class UnsupportedModeError(ValueError):
    pass


@dataclass
class ChannelMoments:
    mean: np.ndarray
    std: np.ndarray
    floored: np.ndarray  # bool per channel: std came from the floor


class RcnParams:
    """Per-channel blend weights, stored unconstrained and clamped to [0, 1] on read."""

    def __init__(self, alpha, beta):
        self.raw_alpha = np.array(alpha, dtype=np.float64).reshape(-1)
        self.raw_beta = np.array(beta, dtype=np.float64).reshape(-1)
        if self.raw_alpha.shape != self.raw_beta.shape:
            raise ValueError("alpha and beta must have one entry per channel")

    @classmethod
    def default(cls, channels: int) -> "RcnParams":
        return cls(np.full(channels, ALPHA_INIT), np.full(channels, BETA_INIT))

    @property
    def channels(self) -> int:
        return self.raw_alpha.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        return np.clip(self.raw_alpha, 0.0, 1.0)

    @property
    def beta(self) -> np.ndarray:
        return np.clip(self.raw_beta, 0.0, 1.0)

    def to_json(self) -> str:
        return json.dumps({"alpha": self.raw_alpha.tolist(), "beta": self.raw_beta.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "RcnParams":
        obj = json.loads(text)
        return cls(obj["alpha"], obj["beta"])

    def save(self, path) -> Path:
        return atomic_write_bytes(path, self.to_json().encode("utf-8"))

    @classmethod
    def load(cls, path) -> "RcnParams":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _as_mask(mask, spatial):
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != spatial:
        raise ValueError(f"mask shape {m.shape} does not match feature size {spatial}")
    if not np.all((m == 0) | (m == 1)):
        raise ValueError("region mask must be binary")
    return m


def _as_feature(f):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError(f"feature map must be (C, H, W), got {f.shape}")
    return f


def masked_moments(f: np.ndarray, mask: np.ndarray, eps: float = EPS_STD) -> ChannelMoments:
    f = _as_feature(f)
    m = _as_mask(mask, f.shape[1:]).astype(bool)
    n = int(m.sum())
    if n == 0:
        raise EmptyRegionError("region mask has no active pixel")
    vals = f[:, m]
    mean = vals.mean(axis=1)
    raw_std = np.sqrt(((vals - mean[:, None]) ** 2).mean(axis=1))
    floored = raw_std < eps
    return ChannelMoments(mean, np.where(floored, eps, raw_std), floored)


def adain_transfer(a, b, mask_a, mask_b, eps: float = EPS_STD) -> np.ndarray:
    """Give A's masked region B's masked channel moments; zero outside ``mask_a``."""
    a = _as_feature(a)
    b = _as_feature(b)
    ma = _as_mask(mask_a, a.shape[1:])
    mom_a = masked_moments(a, ma, eps)
    mom_b = masked_moments(b, mask_b, eps)
    normed = (a - mom_a.mean[:, None, None]) / mom_a.std[:, None, None]
    return (mom_b.std[:, None, None] * normed + mom_b.mean[:, None, None]) * ma


# --- forward / backward --------------------------------------------------------------

# term switches: (cross into face, cross into background, retain face, retain background)
_TERMS = {
    "full": (1, 1, 1, 1),
    "cross_only": (1, 1, 0, 0),
    "same_only": (0, 0, 1, 1),
    "facial_only": (0, 1, 1, 0),
    "nonfacial_only": (1, 0, 0, 1),
}


def _region_stats(x, m, eps):
    """Moments plus the normalized map on the region; None for an empty region."""
    if not m.any():
        return None
    mom = masked_moments(x, m, eps)
    return mom, (x - mom.mean[:, None, None]) / mom.std[:, None, None]


def _forward(u, t, h, alpha, beta, terms, eps):
    hb = 1.0 - h
    su = _region_stats(u, h, eps)
    st = _region_stats(t, hb, eps)
    a = alpha[:, None, None]
    b = beta[:, None, None]
    out = np.zeros_like(u)
    cross_f, cross_b, keep_f, keep_b = terms
    both = su is not None and st is not None
    if both and cross_f:
        out += a * (st[0].std[:, None, None] * su[1] + st[0].mean[:, None, None]) * h
    if both and cross_b:
        out += b * (su[0].std[:, None, None] * st[1] + su[0].mean[:, None, None]) * hb
    # a missing counterpart region drops its cross term and the full weight stays on retention
    if keep_f:
        out += (1.0 - a if both else 1.0) * u * h
    if keep_b:
        out += (1.0 - b if both else 1.0) * t * hb
    return out


def rcn_forward(u, t, h, params: RcnParams | None = None, eps: float = EPS_STD) -> np.ndarray:
    u = _as_feature(u)
    t = _as_feature(t)
    if u.shape != t.shape:
        raise ValueError(f"U {u.shape} and T {t.shape} differ in shape")
    h = _as_mask(h, u.shape[1:])
    params = RcnParams.default(u.shape[0]) if params is None else params
    if params.channels != u.shape[0]:
        raise ValueError(f"params have {params.channels} channels, features {u.shape[0]}")
    return _forward(u, t, h, params.alpha, params.beta, _TERMS["full"], eps)


@dataclass
class RcnGradients:
    grad_u: np.ndarray
    grad_t: np.ndarray
    grad_alpha: np.ndarray
    grad_beta: np.ndarray

    def __iter__(self):
        return iter((self.grad_u, self.grad_t, self.grad_alpha, self.grad_beta))


def _norm_backward(g_hat, x_hat, std, floored, n, mask, g_mean_ext, g_std_ext):
    """Gradient wrt x of a region normalization, given dL/dx_hat on the region plus
    external dL/dmean and dL/dstd (per channel)."""
    s = std[:, None, None]
    gm = (g_hat * mask).sum(axis=(1, 2)) / n
    gxm = (g_hat * x_hat * mask).sum(axis=(1, 2)) / n
    keep = (~floored).astype(np.float64)[:, None, None]
    grad = (g_hat - gm[:, None, None] - keep * x_hat * gxm[:, None, None]) / s
    grad += g_mean_ext[:, None, None] / n + keep * g_std_ext[:, None, None] * x_hat / n
    return grad * mask


def rcn_gradients(u, t, h, params: RcnParams, upstream, eps: float = EPS_STD,
                  _debug_flip_sign: bool = False) -> RcnGradients:
    """Vector-Jacobian products of :func:`rcn_forward` wrt U, T and the raw alpha/beta.

    The mask is a constant. Raw weights outside [0, 1] get zero gradient (clamp).
    ``_debug_flip_sign`` corrupts grad_u on purpose, to check that a checker catches it.
    """
    u = _as_feature(u)
    t = _as_feature(t)
    h = _as_mask(h, u.shape[1:])
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != u.shape or t.shape != u.shape:
        raise ValueError("U, T and upstream gradient must share one shape")
    hb = 1.0 - h
    alpha, beta = params.alpha, params.beta
    a = alpha[:, None, None]
    b = beta[:, None, None]
    su = _region_stats(u, h, eps)
    st = _region_stats(t, hb, eps)

    if su is None or st is None:
        # only retention survives, with unit weight
        grad_u, grad_t = g * h, g * hb
        zero = np.zeros_like(alpha)
        return RcnGradients(-grad_u if _debug_flip_sign else grad_u, grad_t, zero, zero.copy())

    (mu_u, u_hat), (mu_t, t_hat) = su, st
    nu, nt = h.sum(), hb.sum()
    s_u, s_t = mu_u.std, mu_t.std

    g_h = g * h
    g_hb = g * hb
    grad_alpha = ((s_t[:, None, None] * u_hat + mu_t.mean[:, None, None] - u) * g_h).sum(axis=(1, 2))
    grad_beta = ((s_u[:, None, None] * t_hat + mu_u.mean[:, None, None] - t) * g_hb).sum(axis=(1, 2))

    # moments of U feed the face output (via u_hat) and the background output (as target)
    g_mean_u = (b * g_hb).sum(axis=(1, 2))
    g_std_u = (b * g_hb * t_hat).sum(axis=(1, 2))
    g_mean_t = (a * g_h).sum(axis=(1, 2))
    g_std_t = (a * g_h * u_hat).sum(axis=(1, 2))

    grad_u = _norm_backward(a * s_t[:, None, None] * g_h, u_hat, s_u, mu_u.floored, nu, h,
                            g_mean_u, np.where(mu_u.floored, 0.0, g_std_u))
    grad_u += (1.0 - a) * g_h
    grad_t = _norm_backward(b * s_u[:, None, None] * g_hb, t_hat, s_t, mu_t.floored, nt, hb,
                            g_mean_t, np.where(mu_t.floored, 0.0, g_std_t))
    grad_t += (1.0 - b) * g_hb

    in_a = (params.raw_alpha >= 0) & (params.raw_alpha <= 1)
    in_b = (params.raw_beta >= 0) & (params.raw_beta <= 1)
    if _debug_flip_sign:
        grad_u = -grad_u
    return RcnGradients(grad_u, grad_t, grad_alpha * in_a, grad_beta * in_b)


def rcn_variant(mode: str, eps: float = EPS_STD):
    """Forward function ``f(u, t, h, params)`` for an ablation mode.

    ``facial_only`` keeps the background cross term (it carries face statistics) and the
    face retention term; ``nonfacial_only`` keeps the other two. ``adain`` is plain global
    AdaIN of U onto T's full-map moments and ignores ``h`` and params.
    """
    if mode == "spade_like":
        raise UnsupportedModeError("spade_like needs a learned modulation network; not provided")
    if mode == "adain":
        def adain(u, t, h=None, params=None):
            u = _as_feature(u)
            ones = np.ones(u.shape[1:])
            return adain_transfer(u, t, ones, ones, eps)
        return adain
    if mode not in _TERMS:
        raise UnsupportedModeError(f"unknown RCN mode {mode!r}; expected one of {MODES}")
    terms = _TERMS[mode]

    def forward(u, t, h, params=None):
        u = _as_feature(u)
        t = _as_feature(t)
        h = _as_mask(h, u.shape[1:])
        params = RcnParams.default(u.shape[0]) if params is None else params
        return _forward(u, t, h, params.alpha, params.beta, terms, eps)

    forward.mode = mode
    return forward


# --- finite-difference check ---------------------------------------------------------

def finite_difference_check(seed: int = 0, channels: int = 2, height: int = 4, width: int = 4,
                            alpha=None, beta=None, step: float = 1e-5, debug_flip_sign: bool = False):
    """Compare :func:`rcn_gradients` with central differences on a random instance.

    Returns a dict of max relative error per gradient. Relative error of one component is
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)``.
    """
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(channels, height, width))
    t = rng.normal(loc=0.5, scale=2.0, size=(channels, height, width))
    h = np.zeros((height, width))
    # keep both regions at >= 2 pixels
    while h.sum() < 2 or (1 - h).sum() < 2:
        h = (rng.random((height, width)) < 0.5).astype(np.float64)
    alpha = rng.uniform(0.05, 0.95, channels) if alpha is None else np.broadcast_to(alpha, (channels,))
    beta = rng.uniform(0.05, 0.95, channels) if beta is None else np.broadcast_to(beta, (channels,))
    params = RcnParams(alpha, beta)
    g = rng.normal(size=u.shape)

    analytic = rcn_gradients(u, t, h, params, g, _debug_flip_sign=debug_flip_sign)

    def directional(fn_plus, fn_minus):
        # sum of upstream * output difference, formed elementwise before summing
        return float((g * (fn_plus - fn_minus)).sum() / (2 * step))

    def perturb_feature(which):
        base = u if which == "u" else t
        num = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[idx] += step
            minus[idx] -= step
            if which == "u":
                num[idx] = directional(rcn_forward(plus, t, h, params), rcn_forward(minus, t, h, params))
            else:
                num[idx] = directional(rcn_forward(u, plus, h, params), rcn_forward(u, minus, h, params))
        return num

    def perturb_weight(which):
        # on a clamp bound the two-sided stencil straddles the kink, so step inward only
        num = np.zeros(channels)
        for c in range(channels):
            raw = (params.raw_alpha if which == "alpha" else params.raw_beta)[c]
            lo = raw if raw == 0.0 else raw - step
            hi = raw if raw == 1.0 else raw + step
            outs = []
            for value in (hi, lo):
                ap, bp = params.raw_alpha.copy(), params.raw_beta.copy()
                (ap if which == "alpha" else bp)[c] = value
                outs.append(rcn_forward(u, t, h, RcnParams(ap, bp)))
            num[c] = directional(*outs) * (2 * step) / (hi - lo)
        return num

    numeric = {
        "grad_u": perturb_feature("u"),
        "grad_t": perturb_feature("t"),
        "grad_alpha": perturb_weight("alpha"),
        "grad_beta": perturb_weight("beta"),
    }
    report = {}
    for name, num in numeric.items():
        ana = getattr(analytic, name)
        denom = np.maximum(np.maximum(np.abs(ana), np.abs(num)), 1e-6)
        report[name] = float((np.abs(ana - num) / denom).max())
    return report
