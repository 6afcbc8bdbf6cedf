"""Synthetic sequences for demos and hermetic tests.

Compressible moving content: smooth gradients plus drifting blobs and a
little seeded noise, so rate-quality behavior resembles real video
without shipping any.
"""

from __future__ import annotations

import numpy as np

from .frame_io import C400, Frame, VideoSpec


def synthetic_plane(width, height, t, max_value, rng) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    base = 0.5 + 0.25 * np.sin(2 * np.pi * (xx / width + 0.03 * t)) \
        + 0.15 * np.cos(2 * np.pi * (yy / height - 0.02 * t))
    cx = width * (0.5 + 0.3 * np.sin(0.2 * t))
    cy = height * (0.5 + 0.3 * np.cos(0.15 * t))
    sigma = 0.12 * min(width, height) + 1.0
    blob = 0.35 * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma ** 2))
    noise = rng.normal(0.0, 0.01, (height, width))
    return np.clip((base + blob + noise) * max_value, 0, max_value)


def synthetic_sequence(spec: VideoSpec, seed: int = 0) -> list[Frame]:
    """Generate spec.frame_count frames of moving synthetic content."""
    rng = np.random.default_rng(seed)
    frames = []
    for t in range(spec.frame_count):
        y = synthetic_plane(spec.width, spec.height, t, spec.max_value, rng)
        y = np.floor(y + 0.5).astype(spec.dtype)
        if spec.chroma == C400:
            frames.append(Frame(y=y))
            continue
        cw, ch = spec.width // 2, spec.height // 2
        cb = synthetic_plane(cw, ch, t + 31, spec.max_value, rng)
        cr = synthetic_plane(cw, ch, t + 67, spec.max_value, rng)
        frames.append(
            Frame(
                y=y,
                cb=np.floor(cb + 0.5).astype(spec.dtype),
                cr=np.floor(cr + 0.5).astype(spec.dtype),
            )
        )
    return frames
