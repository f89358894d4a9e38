"""Two-view stochastic augmentation.

Image pipeline, in order: random resized crop, color jitter, grayscale,
Gaussian blur, horizontal flip, clamp to [0, 1], per-channel normalization.
Random draws are separated from their application (:func:`sample_augment_params`
and :func:`apply_augment`) so branch frequencies can be audited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidImage

LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class AugmentPolicy:
    crop_scale_range: tuple[float, float] = (0.2, 1.0)
    crop_aspect_range: tuple[float, float] = (3 / 4, 4 / 3)
    brightness: float = 0.4
    contrast: float = 0.4
    saturation: float = 0.4
    hue: float = 0.1
    jitter_prob: float = 0.8
    grayscale_prob: float = 0.2
    blur_prob: float = 0.5
    blur_sigma_range: tuple[float, float] = (0.1, 2.0)
    flip_prob: float = 0.5
    channel_mean: tuple[float, ...] = (0.0, 0.0, 0.0)
    channel_std: tuple[float, ...] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("jitter_prob", "grayscale_prob", "blur_prob", "flip_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")
        for name in ("crop_scale_range", "crop_aspect_range", "blur_sigma_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name}={lo, hi} is not a valid positive range")
        if any(s <= 0 for s in self.channel_std):
            raise ValueError("channel_std entries must be > 0")

    @classmethod
    def identity(cls, channel_mean=(0.0, 0.0, 0.0), channel_std=(1.0, 1.0, 1.0)):
        """Degenerate policy: full-image crop, every stochastic branch off."""
        return cls(crop_scale_range=(1.0, 1.0), crop_aspect_range=(1.0, 1.0), jitter_prob=0.0,
                   grayscale_prob=0.0, blur_prob=0.0, flip_prob=0.0,
                   channel_mean=tuple(channel_mean), channel_std=tuple(channel_std))


@dataclass
class AugmentDraw:
    crop: tuple[int, int, int, int]  # top, left, height, width
    jitter: tuple[float, float, float, float] | None  # brightness, contrast, saturation, hue
    grayscale: bool
    blur_sigma: float | None
    flip: bool


def _crop_box(h, w, policy, rng):
    area = h * w
    log_lo, log_hi = (math.log(r) for r in policy.crop_aspect_range)
    for _ in range(10):
        target = area * rng.uniform(*policy.crop_scale_range)
        aspect = math.exp(rng.uniform(log_lo, log_hi))
        cw = int(round(math.sqrt(target * aspect)))
        ch = int(round(math.sqrt(target / aspect)))
        if 0 < cw <= w and 0 < ch <= h:
            top = int(rng.integers(0, h - ch + 1))
            left = int(rng.integers(0, w - cw + 1))
            return top, left, ch, cw
    # fallback: largest centered crop with an in-range aspect ratio
    ratio = w / h
    lo, hi = policy.crop_aspect_range
    if ratio < lo:
        cw, ch = w, int(round(w / lo))
    elif ratio > hi:
        ch, cw = h, int(round(h * hi))
    else:
        cw, ch = w, h
    return (h - ch) // 2, (w - cw) // 2, ch, cw


def sample_augment_params(shape, policy: AugmentPolicy, rng) -> AugmentDraw:
    h, w = shape[0], shape[1]
    crop = _crop_box(h, w, policy, rng)
    jitter = None
    if rng.random() < policy.jitter_prob:
        jitter = (rng.uniform(max(0.0, 1 - policy.brightness), 1 + policy.brightness),
                  rng.uniform(max(0.0, 1 - policy.contrast), 1 + policy.contrast),
                  rng.uniform(max(0.0, 1 - policy.saturation), 1 + policy.saturation),
                  rng.uniform(-policy.hue, policy.hue))
    grayscale = bool(rng.random() < policy.grayscale_prob)
    blur_sigma = rng.uniform(*policy.blur_sigma_range) if rng.random() < policy.blur_prob else None
    flip = bool(rng.random() < policy.flip_prob)
    return AugmentDraw(crop, jitter, grayscale, blur_sigma, flip)


def resize_bilinear(img, out_h, out_w):
    """Bilinear resize with half-pixel centers and edge clamping."""
    in_h, in_w = img.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return img.copy()

    def coords(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = coords(out_h, in_h)
    x0, x1, fx = coords(out_w, in_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bottom = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def grayscale(img):
    if img.shape[2] != 3:
        return img.copy()
    lum = img @ LUMA
    return np.repeat(lum[:, :, None], 3, axis=2)


def _rgb_to_hsv(img):
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    maxc = img.max(axis=2)
    minc = img.min(axis=2)
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1), 0.0)
    safe = np.where(delta > 0, delta, 1.0)
    rc, gc, bc = (maxc - r) / safe, (maxc - g) / safe, (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return h, s, maxc


def _hsv_to_rgb(h, s, v):
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    i = i.astype(int) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=2)


def color_jitter(img, brightness, contrast, saturation, hue):
    out = np.clip(img * brightness, 0, 1)
    if img.shape[2] == 3:
        mean = float((out @ LUMA).mean())
        out = np.clip((out - mean) * contrast + mean, 0, 1)
        gray = grayscale(out)
        out = np.clip(gray + (out - gray) * saturation, 0, 1)
        if hue != 0.0:
            h, s, v = _rgb_to_hsv(out)
            out = _hsv_to_rgb((h + hue) % 1.0, s, v)
    else:
        mean = float(out.mean())
        out = np.clip((out - mean) * contrast + mean, 0, 1)
    return out


def gaussian_kernel(sigma):
    radius = max(1, math.ceil(2 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img, sigma):
    """Separable blur, kernel radius ceil(2 * sigma), reflect padding."""
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    out = img
    for axis in (0, 1):
        pad = [(0, 0)] * 3
        pad[axis] = (r, r)
        padded = np.pad(out, pad, mode="reflect")
        n = out.shape[axis]
        acc = np.zeros_like(out)
        for j, wj in enumerate(k):
            acc += wj * np.take(padded, np.arange(j, j + n), axis=axis)
        out = acc
    return out


def apply_augment(image, draw: AugmentDraw, policy: AugmentPolicy | None = None):
    """Apply a sampled draw; result is clamped to [0, 1] and NOT normalized."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    top, left, ch, cw = draw.crop
    out = resize_bilinear(img[top: top + ch, left: left + cw], h, w)
    if draw.jitter is not None:
        out = color_jitter(out, *draw.jitter)
    if draw.grayscale:
        out = grayscale(out)
    if draw.blur_sigma is not None:
        out = gaussian_blur(out, draw.blur_sigma)
    if draw.flip:
        out = out[:, ::-1]
    return np.clip(out, 0.0, 1.0)


def _check_image(image):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or min(img.shape) < 1:
        raise InvalidImage(f"expected an H x W x C image, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise InvalidImage("image values must lie in [0, 1]")
    return img


def normalize_channels(img, policy: AugmentPolicy):
    mean = np.asarray(policy.channel_mean[: img.shape[2]])
    std = np.asarray(policy.channel_std[: img.shape[2]])
    return (img - mean) / std


def augment_view(image, policy: AugmentPolicy, rng):
    img = _check_image(image)
    draw = sample_augment_params(img.shape, policy, rng)
    return normalize_channels(apply_augment(img, draw, policy), policy)


def two_views(image, policy: AugmentPolicy, rng):
    """Two independent draws from one stream, view1 first."""
    v1 = augment_view(image, policy, rng)
    v2 = augment_view(image, policy, rng)
    return v1, v2


@dataclass(frozen=True)
class VectorAugmentPolicy:
    """Augmentation for feature vectors: additive noise, then coordinate dropout.

    Noise is added in the raw [0, 1] feature space (then clamped); dropout
    zeroes coordinates after normalization, i.e. resets them to the mean.
    """

    noise_sigma: float = 0.05
    dropout_prob: float = 0.1
    mean: np.ndarray | float = 0.0
    std: np.ndarray | float = 1.0

    @classmethod
    def for_spread(cls, spread, mean=0.0, std=1.0, dropout_prob=0.1):
        return cls(spread / 2.0, dropout_prob, mean, std)


def augment_vector(x, policy: VectorAugmentPolicy, rng):
    """Augment a batch (B, dim) or single vector of raw features."""
    x = np.asarray(x, dtype=np.float64)
    noisy = np.clip(x + policy.noise_sigma * rng.standard_normal(x.shape), 0.0, 1.0)
    out = (noisy - policy.mean) / policy.std
    keep = rng.random(x.shape) >= policy.dropout_prob
    return out * keep


def two_vector_views(x, policy: VectorAugmentPolicy, rng):
    v1 = augment_vector(x, policy, rng)
    v2 = augment_vector(x, policy, rng)
    return v1, v2
