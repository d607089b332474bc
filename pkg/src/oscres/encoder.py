"""Image to time-series encoding.

Pipeline: bytes/255 -> bilinear resize 28x28 to 32x32 -> optional Gaussian
noise -> Hilbert-curve traversal (1024 samples) -> sliding-window embedding
stretched to ``n_ts`` frames of width ``n_in``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, EmbeddingError, InputError


@dataclass(frozen=True)
class EncoderParams:
    n_in: int = 16
    n_ts: int = 2018
    stride: int = 1
    noise_sigma: float = 0.05
    augment: bool = False
    size: int = 32

    def __post_init__(self):
        if self.n_in < 1 or self.n_ts < 1 or self.stride < 1:
            raise ConfigError("n_in, n_ts and stride must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.size < 1 or self.size & (self.size - 1):
            raise ConfigError("resize target must be a power of two for the Hilbert traversal")

    @property
    def n_windows(self) -> int:
        return (self.size * self.size - self.n_in) // self.stride + 1


def _check_grid(img: np.ndarray, shape=None) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 1:
        raise InputError(f"expected a 2-D image, got shape {img.shape}")
    if shape is not None and img.shape != shape:
        raise InputError(f"expected image of shape {shape}, got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InputError("image contains non-finite values")
    return img


def _bilinear_taps(n_src: int, n_dst: int):
    scale = n_src / n_dst
    src = (np.arange(n_dst) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_src - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, src - i0


def resize_bilinear(img: np.ndarray, out_shape=(32, 32), in_shape=(28, 28)) -> np.ndarray:
    """Separable bilinear resize with half-pixel centers and edge clamping.

    Accepts a single ``(H, W)`` image or a stack ``(..., H, W)``.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.shape[-2:] != tuple(in_shape):
        raise InputError(f"expected trailing shape {tuple(in_shape)}, got {img.shape}")
    r0, r1, fr = _bilinear_taps(in_shape[0], out_shape[0])
    c0, c1, fc = _bilinear_taps(in_shape[1], out_shape[1])
    rows = img[..., r0, :] * (1.0 - fr)[:, None] + img[..., r1, :] * fr[:, None]
    out = rows[..., c0] * (1.0 - fc) + rows[..., c1] * fc
    return np.clip(out, 0.0, 1.0)


def add_gaussian_noise(img: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    img = np.asarray(img, dtype=np.float64)
    if sigma == 0:
        return img.copy()
    return np.clip(img + rng.normal(0.0, sigma, size=img.shape), 0.0, 1.0)


def hilbert_index_to_xy(order: int, d: int) -> tuple[int, int]:
    """Cell ``(x, y)`` visited at step ``d`` of the Hilbert curve on a 2^order grid.

    The curve starts at (0, 0) and ends at (2^order - 1, 0).
    """
    if order < 1:
        raise ConfigError(f"order must be >= 1, got {order}")
    n = 1 << order
    if not 0 <= d < n * n:
        raise IndexError(f"Hilbert index {d} out of range [0, {n * n})")
    x = y = 0
    t = d
    s = 1
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x = s - 1 - x
                y = s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y


@lru_cache(maxsize=None)
def hilbert_path(order: int) -> np.ndarray:
    """All ``4**order`` cells in curve order as an int array of shape (L, 2) holding (x, y)."""
    cells = [hilbert_index_to_xy(order, d) for d in range(4**order)]
    path = np.array(cells, dtype=np.intp)
    path.setflags(write=False)
    return path


def hilbert_traverse(img: np.ndarray) -> np.ndarray:
    """Read a square power-of-two image (or stack of them) along the Hilbert curve.

    ``x`` indexes columns and ``y`` rows, so ``seq[d] = img[y_d, x_d]``.
    """
    img = np.asarray(img, dtype=np.float64)
    n = img.shape[-1]
    if img.ndim < 2 or img.shape[-2] != n or n < 2 or n & (n - 1):
        raise InputError(f"expected square power-of-two image, got shape {img.shape}")
    order = n.bit_length() - 1
    path = hilbert_path(order)
    return img[..., path[:, 1], path[:, 0]]


def frame_window_index(n_windows: int, n_ts: int) -> np.ndarray:
    """Window index used by each of the ``n_ts`` frames.

    Each window is repeated ``n_ts // n_windows`` times; the ``n_ts % n_windows``
    leftover frames copy the start of that expanded sequence.
    """
    if n_windows > n_ts:
        raise EmbeddingError(f"{n_windows} windows do not fit in {n_ts} frames")
    r = n_ts // n_windows
    expanded = np.repeat(np.arange(n_windows), r)
    return np.concatenate([expanded, expanded[: n_ts - expanded.size]])


def window_embed(seq: np.ndarray, n_in: int, n_ts: int, stride: int = 1) -> np.ndarray:
    """Sliding-window embedding of a 1-D sequence (or a batch ``(B, L)``) into frames.

    Returns shape ``(n_ts, n_in)`` for a single sequence, ``(B, n_ts, n_in)`` for a batch.
    """
    seq = np.asarray(seq, dtype=np.float64)
    L = seq.shape[-1]
    if n_in < 1 or stride < 1:
        raise ConfigError("n_in and stride must be >= 1")
    if n_in > L:
        raise EmbeddingError(f"window {n_in} longer than sequence {L}")
    m = (L - n_in) // stride + 1
    widx = frame_window_index(m, n_ts)
    offsets = widx[:, None] * stride + np.arange(n_in)[None, :]
    return seq[..., offsets]


def encode_image(
    raw: np.ndarray, params: EncoderParams = EncoderParams(), rng: np.random.Generator | None = None
) -> np.ndarray:
    """Encode one raw 28x28 image (bytes 0..255) into an ``(n_ts, n_in)`` drive."""
    raw = _check_grid(raw, (28, 28))
    return encode_batch(raw[None], params, rng)[0]


def encode_batch(
    raws: np.ndarray, params: EncoderParams = EncoderParams(), rng: np.random.Generator | None = None
) -> np.ndarray:
    """Vectorized :func:`encode_image` over a ``(B, 28, 28)`` stack."""
    raws = np.asarray(raws, dtype=np.float64)
    if raws.ndim != 3 or raws.shape[1:] != (28, 28):
        raise InputError(f"expected (B, 28, 28) images, got {raws.shape}")
    if raws.size and (raws.min() < 0 or raws.max() > 255):
        raise InputError("raw pixel values must lie in [0, 255]")
    img = resize_bilinear(raws / 255.0, (params.size, params.size))
    if params.augment and params.noise_sigma > 0:
        if rng is None:
            raise ConfigError("noise augmentation needs an explicit generator")
        img = add_gaussian_noise(img, params.noise_sigma, rng)
    seq = hilbert_traverse(img)
    return window_embed(seq, params.n_in, params.n_ts, params.stride)


def encode_sequences(
    raws: np.ndarray, params: EncoderParams = EncoderParams(), rng: np.random.Generator | None = None
) -> np.ndarray:
    """Hilbert sequences ``(B, size*size)`` before windowing.

    The simulator consumes these with :func:`frame_window_index` instead of
    the fully expanded frames, which would be ``n_in`` times larger.
    """
    raws = np.asarray(raws, dtype=np.float64)
    if raws.ndim != 3 or raws.shape[1:] != (28, 28):
        raise InputError(f"expected (B, 28, 28) images, got {raws.shape}")
    img = resize_bilinear(raws / 255.0, (params.size, params.size))
    if params.augment and params.noise_sigma > 0:
        if rng is None:
            raise ConfigError("noise augmentation needs an explicit generator")
        img = add_gaussian_noise(img, params.noise_sigma, rng)
    return hilbert_traverse(img)
