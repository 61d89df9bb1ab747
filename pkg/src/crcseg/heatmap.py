"""Uncertainty heatmaps from multi-labeled masks.

The per-pixel prediction-set size is a direct readout of ambiguity:
singleton sets mean the model was confident, large sets mean many
classes remained plausible. Rendering maps the per-pixel set count to a
unit intensity (dividing either by the class count or by the largest
observed count, which keeps contrast on datasets with many classes) and
then through a diverging blue-to-red palette.

All rounding here is round-half-up, so rendered bytes are reproducible
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .lac import set_size_map
from .types import MultiMask

NORM_BY_K = "k"
NORM_BY_MAX = "max"
NORMALIZATIONS = (NORM_BY_K, NORM_BY_MAX)

# anchor positions and colors of the built-in diverging palette
PALETTES: dict[str, tuple[tuple[float, tuple[int, int, int]], ...]] = {
    "thermal": (
        (0.00, (49, 54, 149)),
        (0.25, (69, 117, 180)),
        (0.50, (254, 224, 144)),
        (0.75, (244, 109, 67)),
        (1.00, (165, 0, 38)),
    ),
}


@dataclass(frozen=True)
class HeatmapOptions:
    """Rendering choices.

    Attributes:
        normalization: ``"k"`` divides set counts by the class count,
            ``"max"`` by the largest count observed in the mask.
        colormap: Name of a registered palette.
        overlay_blend: Heatmap weight when compositing onto a photo,
            in [0, 1]; None renders the heatmap alone.
    """

    normalization: str = NORM_BY_K
    colormap: str = "thermal"
    overlay_blend: float | None = None

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(
                f"normalization must be one of {NORMALIZATIONS}, got {self.normalization!r}"
            )
        if self.colormap not in PALETTES:
            raise ValueError(f"unknown colormap {self.colormap!r}")
        if self.overlay_blend is not None:
            blend = float(self.overlay_blend)
            if not 0.0 <= blend <= 1.0:
                raise ValueError(f"overlay_blend must lie in [0, 1], got {blend!r}")
            object.__setattr__(self, "overlay_blend", blend)


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5).astype(np.uint8)


def intensity_map(mask: MultiMask, options: HeatmapOptions = HeatmapOptions()) -> np.ndarray:
    """Per-pixel set counts scaled to [0, 1] as a float64 (H, W) array."""
    counts = set_size_map(mask)
    if options.normalization == NORM_BY_K:
        return counts / float(mask.dims.k)
    top = int(counts.max())
    if top < 1:
        raise ValueError("max-normalization needs at least one nonempty pixel set")
    return counts / float(top)


def render(intensity: np.ndarray, options: HeatmapOptions = HeatmapOptions()) -> np.ndarray:
    """Map unit intensities through the palette to an (H, W, 3) uint8 image."""
    intensity = np.asarray(intensity, dtype=np.float64)
    if intensity.ndim != 2:
        raise ValueError(f"intensity must be 2-D, got {intensity.ndim} axes")
    if intensity.size and (intensity.min() < 0.0 or intensity.max() > 1.0):
        raise ValueError("intensity values must lie in [0, 1]")
    palette = PALETTES[options.colormap]
    positions = np.asarray([pos for pos, _ in palette])
    colors = np.asarray([rgb for _, rgb in palette], dtype=np.float64)
    flat = intensity.reshape(-1)
    channels = [
        _round_half_up(np.interp(flat, positions, colors[:, c])) for c in range(3)
    ]
    return np.stack(channels, axis=-1).reshape(*intensity.shape, 3)


def overlay(heat: np.ndarray, photo: np.ndarray, blend: float) -> np.ndarray:
    """Blend a rendered heatmap onto a photo: blend*heat + (1-blend)*photo."""
    heat = np.asarray(heat)
    photo = np.asarray(photo)
    if heat.shape != photo.shape:
        raise DimensionMismatch(
            f"heatmap shape {heat.shape} does not match photo shape {photo.shape}"
        )
    blend = float(blend)
    if not 0.0 <= blend <= 1.0:
        raise ValueError(f"blend must lie in [0, 1], got {blend!r}")
    mixed = blend * heat.astype(np.float64) + (1.0 - blend) * photo.astype(np.float64)
    return _round_half_up(mixed)


def black_out(image: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Zero the pixels flagged invalid (e.g. IGNORE-labeled ones)."""
    image = np.asarray(image)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != image.shape[:2]:
        raise DimensionMismatch(
            f"valid map {valid.shape} does not match image {image.shape[:2]}"
        )
    out = image.copy()
    out[~valid] = 0
    return out
