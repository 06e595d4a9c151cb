"""Frame loading, color/gray planes, gradients, and per-row prefix sums."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

# BT.601 luma coefficients
_LUMA = np.array([0.299, 0.587, 0.114])


class FrameError(ValueError):
    """Raised for unreadable, unsupported, or degenerate frame files."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Frame:
    """One video frame: rgb in [0,1], luminance, and squared gradient magnitude.

    All planes are float64, row-major, immutable after construction.
    """

    rgb: np.ndarray      # (H, W, 3)
    gray: np.ndarray     # (H, W)
    grad_sq: np.ndarray  # (H, W)

    @property
    def width(self) -> int:
        return self.gray.shape[1]

    @property
    def height(self) -> int:
        return self.gray.shape[0]

    @staticmethod
    def from_rgb(rgb: np.ndarray) -> "Frame":
        rgb = np.asarray(rgb, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise FrameError(f"expected (H, W, 3) rgb array, got {rgb.shape}")
        if rgb.shape[0] == 0 or rgb.shape[1] == 0:
            raise FrameError("zero-dimension image")
        gray = rgb @ _LUMA
        return Frame(_freeze(rgb.copy()), _freeze(gray), _freeze(grad_sq_plane(gray)))

    @staticmethod
    def from_gray(gray: np.ndarray) -> "Frame":
        gray = np.asarray(gray, dtype=np.float64)
        return Frame.from_rgb(np.repeat(gray[:, :, None], 3, axis=2))


def grad_sq_plane(gray: np.ndarray) -> np.ndarray:
    """Squared gradient magnitude by central differences, borders edge-replicated."""
    padded = np.pad(gray, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return gx * gx + gy * gy


def load_frame(path) -> Frame:
    """Load an 8-bit RGB or grayscale image file (PNG, PPM/PGM) as a Frame."""
    try:
        img = Image.open(path)
        img.load()
    except (OSError, UnidentifiedImageError, SyntaxError) as exc:
        raise FrameError(f"cannot decode {path}: {exc}") from exc
    if img.mode in ("I", "I;16", "I;16B", "F"):
        raise FrameError(f"unsupported bit depth (mode {img.mode}) in {path}")
    if img.mode not in ("RGB", "L"):
        img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise FrameError(f"zero-dimension image {path}")
    return Frame.from_rgb(arr)


def list_frames(directory) -> list:
    """Frame files in a directory, sorted lexicographically by name."""
    exts = (".png", ".ppm", ".pgm")
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(exts))
    return [os.path.join(directory, n) for n in names]


@dataclass(frozen=True)
class RowPrefixPlane:
    """Per-row running sums: values[y, x] = sum of source[y, :x+1]."""

    values: np.ndarray

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def row_prefix(source: np.ndarray) -> RowPrefixPlane:
    """Exact per-row running sums of a scalar plane (one pass, no reassociation)."""
    source = np.asarray(source, dtype=np.float64)
    if source.ndim != 2 or source.shape[0] == 0 or source.shape[1] == 0:
        raise ValueError(f"expected non-empty 2-D plane, got shape {source.shape}")
    return RowPrefixPlane(_freeze(np.cumsum(source, axis=1)))
