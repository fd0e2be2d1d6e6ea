"""Input validation helpers shared by the public types and the estimator API.

Array inputs are normalized to float64, checked for finiteness, and clamped
to [0, 1] where the domain demands it.  Clamping is silent but counted, so
callers feeding overshooting disparity predictions can audit how much was
cut off without the pipeline rejecting their data.
"""

from __future__ import annotations

import threading

import numpy as np

DTYPE = np.float64


class ClampCounter:
    """Process-wide counter of samples clamped into [0, 1] at construction."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int):
        if n:
            with self._lock:
                self._count += int(n)

    @property
    def count(self) -> int:
        return self._count

    def reset(self):
        with self._lock:
            self._count = 0


clamp_events = ClampCounter()


def as_unit_array(data, name: str = "data") -> np.ndarray:
    """Return a read-only float64 copy of `data`, clamped to [0, 1].

    Rejects non-finite input outright; out-of-range finite values are
    clamped and counted in `clamp_events`.
    """
    arr = np.asarray(data, dtype=DTYPE).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    out_of_range = int(np.count_nonzero((arr < 0.0) | (arr > 1.0)))
    if out_of_range:
        clamp_events.add(out_of_range)
        np.clip(arr, 0.0, 1.0, out=arr)
    arr.flags.writeable = False
    return arr


def check_image_array(data) -> np.ndarray:
    """Validate an (H, W) or (H, W, C) image array; returns (H, W, C)."""
    arr = np.asarray(data, dtype=DTYPE)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"image must be 2-D or 3-D, got shape {arr.shape}")
    if arr.shape[2] not in (1, 2, 3, 4):
        raise ValueError(f"image must have 1..4 channels, got {arr.shape[2]}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got {arr.shape}")
    return as_unit_array(arr, "image")


def check_map_array(data, name: str = "map") -> np.ndarray:
    """Validate a single-channel (H, W) map in [0, 1]."""
    arr = np.asarray(data, dtype=DTYPE)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got {arr.shape}")
    return as_unit_array(arr, name)


def check_finite_array(data, name: str = "field") -> np.ndarray:
    """Validate a 2-D float array that only needs to be finite."""
    arr = np.asarray(data, dtype=DTYPE).copy()
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


def check_same_size(a, b, what: str = "inputs"):
    if a.shape[:2] != b.shape[:2]:
        raise ValueError(
            f"{what} must share spatial dimensions: {a.shape[:2]} vs {b.shape[:2]}"
        )


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (1.0 <= gamma <= 4.0):
        raise ValueError(f"gamma must lie in [1, 4], got {gamma}")
    return gamma
