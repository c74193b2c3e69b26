"""Lossless frame rendering for the service and UI.

The overlay palette is fixed and shared with the web client so target
panels and thumbnails agree. Tinting blends 40% of the label color into
the grayscale pixel: out = round(0.6 * gray + 0.4 * tint), per channel.
"""
from __future__ import annotations

import io

import numpy as np
from PIL import Image

# Okabe-Ito colors, one per schema label (1-based).
OVERLAY_PALETTE = {
    1: (230, 159, 0),  # lv_cavity: orange
    2: (86, 180, 233),  # lv_myocardium: sky blue
    3: (0, 158, 115),  # rv_cavity: green
}
OVERLAY_OPACITY = 0.4


def render_frame_png(frame: np.ndarray, label_frame: np.ndarray | None = None) -> bytes:
    """Encode one grayscale frame as PNG, optionally tinting labeled pixels."""
    if label_frame is None:
        img = Image.fromarray(frame, mode="L")
    else:
        rgb = np.repeat(frame[:, :, None].astype(np.float64), 3, axis=2)
        for label, tint in OVERLAY_PALETTE.items():
            mask = label_frame == label
            if not mask.any():
                continue
            rgb[mask] = (1 - OVERLAY_OPACITY) * rgb[mask] + OVERLAY_OPACITY * np.array(tint)
        img = Image.fromarray(np.clip(np.rint(rgb), 0, 255).astype(np.uint8), mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
