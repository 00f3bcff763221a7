"""Grayscale slice rendering with contour overlays, for the steering UI.

Pixel (0, 0) is the minimum-index corner of the slice plane. Overlay colors
(RGBA): current contour green (80, 220, 60, 255), previous contour magenta
(230, 60, 230, 255), annulus intersection blue (60, 160, 255, 255).
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import GeometryError
from .levelset import LevelSetState

AXES = ("I", "J", "K")

CURRENT_RGBA = (80, 220, 60, 255)
PREVIOUS_RGBA = (230, 60, 230, 255)
ANNULUS_RGBA = (60, 160, 255, 255)


def _axis_number(axis: str) -> int:
    axis = axis.upper()
    if axis not in AXES:
        raise GeometryError(f"axis must be one of {AXES}, got {axis!r}")
    return AXES.index(axis)


def _take_plane(data: np.ndarray, ax: int, index: int) -> np.ndarray:
    return np.take(data, index, axis=ax)


def _contour_pixels(mask2d: np.ndarray) -> np.ndarray:
    if not mask2d.any():
        return mask2d
    return mask2d & ~ndimage.binary_erosion(mask2d, border_value=0)


def render_slice(session, axis: str, index: int, overlays: set[str] | None = None) -> bytes:
    """8-bit slice PNG with optional 'cur', 'prev', 'annulus' contour overlays."""
    overlays = overlays or set()
    unknown = overlays - {"cur", "prev", "annulus"}
    if unknown:
        raise GeometryError(f"unknown overlay flags {sorted(unknown)}")
    ax = _axis_number(axis)
    dims = session.volume.grid.dims
    if not (0 <= index < dims[ax]):
        raise IndexError(f"slice index {index} out of range [0, {dims[ax] - 1}] on axis {axis}")

    lo, hi = session.window()
    plane = _take_plane(np.asarray(session.volume.data), ax, index).astype(np.float64)
    gray = np.clip((plane - lo) / (hi - lo) * 255.0, 0, 255).astype(np.uint8)
    rgba = np.stack([gray, gray, gray, np.full_like(gray, 255)], axis=-1)

    def paint_state(state: LevelSetState | None, color):
        if state is None:
            return
        mask2d = _take_plane(state.phi < 0, ax, index)
        edge = _contour_pixels(mask2d)
        rgba[edge] = color

    if "prev" in overlays:
        paint_state(session.previous_state(), PREVIOUS_RGBA)
    if "cur" in overlays:
        paint_state(session.current_state(), CURRENT_RGBA)
    if "annulus" in overlays and session.annulus is not None:
        idx = session.volume.grid.world_to_index(session.annulus.samples)
        near = np.abs(idx[:, ax] - index) <= 0.5
        keep = [a for a in range(3) if a != ax]
        pix = np.rint(idx[near][:, keep]).astype(int)
        in_img = ((pix[:, 0] >= 0) & (pix[:, 0] < rgba.shape[0])
                  & (pix[:, 1] >= 0) & (pix[:, 1] < rgba.shape[1]))
        pix = pix[in_img]
        rgba[pix[:, 0], pix[:, 1]] = ANNULUS_RGBA

    # Row 0 / column 0 of the array are the minimum-index corner; transpose so
    # PNG pixel (x, y) = (first remaining axis, second remaining axis).
    img = Image.fromarray(np.transpose(rgba, (1, 0, 2)), mode="RGBA")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
