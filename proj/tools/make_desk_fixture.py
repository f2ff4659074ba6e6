#!/usr/bin/env python3
"""Builds the 256x256 desk-scale material used by the training tests.

Albedo, normal and ARM maps are derived from the CC0 "Bricks25" photo that
ships with scikit-image (skimage.data.brick), mixed with procedural content:
a tinted colour ramp, a painted metal plate and a roughness pattern.

    python3 tools/make_desk_fixture.py tests/data/desk
"""

import argparse
import os

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage import data

SIZE = 256


def photo() -> np.ndarray:
    img = data.brick().astype(np.float64) / 255.0
    # 2x2 box downsample 512 -> 256.
    img = img.reshape(SIZE, 2, SIZE, 2).mean(axis=(1, 3))
    lo, hi = np.percentile(img, [1, 99])
    return np.clip((img - lo) / (hi - lo), 0.0, 1.0)


def save_rgb(path: str, rgb: np.ndarray) -> None:
    out = np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(out, mode="RGB").save(path)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    args = parser.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    p = photo()
    y, x = np.mgrid[0:SIZE, 0:SIZE] / (SIZE - 1.0)

    # Metal plate: a rounded rectangle with a soft edge.
    dx = np.maximum(np.abs(x - 0.72) - 0.14, 0.0)
    dy = np.maximum(np.abs(y - 0.28) - 0.10, 0.0)
    plate = np.clip(1.0 - (np.hypot(dx, dy) - 0.04) / 0.015, 0.0, 1.0)

    brick_tint = np.stack([0.30 + 0.55 * p, 0.18 + 0.40 * p, 0.12 + 0.30 * p], axis=-1)
    ramp = np.stack([0.5 + 0.3 * x, 0.4 + 0.2 * np.sin(6.0 * y), 0.3 + 0.3 * (1 - x) * y], axis=-1)
    albedo = 0.8 * brick_tint + 0.2 * ramp
    metal = np.array([0.85, 0.78, 0.62])
    albedo = albedo * (1 - plate[..., None]) + metal * plate[..., None] * (0.9 + 0.1 * p[..., None])

    height = ndimage.gaussian_filter(p, 1.0) * (1 - plate) + 0.9 * plate
    gy, gx = np.gradient(height)
    n = np.stack([-4.0 * gx, -4.0 * gy, np.ones_like(gx)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    normal = 0.5 + 0.5 * n

    ao = 0.55 + 0.45 * ndimage.gaussian_filter(p, 3.0)
    rough = np.clip(0.35 + 0.45 * (1 - p) + 0.1 * np.sin(20 * x) * np.sin(14 * y), 0, 1)
    rough = rough * (1 - plate) + 0.25 * plate
    metalness = plate
    arm = np.stack([ao, rough, metalness], axis=-1)

    save_rgb(os.path.join(args.out_dir, "albedo.png"), albedo)
    save_rgb(os.path.join(args.out_dir, "normal.png"), normal)
    save_rgb(os.path.join(args.out_dir, "arm.png"), arm)


if __name__ == "__main__":
    main()
