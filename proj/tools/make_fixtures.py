#!/usr/bin/env python3
"""Generate the bundled fixture scenes.

Each scene is a procedural outdoor view (sky, ground plane, buildings, trees)
rendered together with a metric-free depth map in [0, 1] where 1 is the
farthest point (sky). Output layout:

    <out>/clear/<scene_id>.png
    <out>/depth/<scene_id>.png

The generator is deterministic; rerunning it reproduces the committed files.
"""

import argparse
import os

import numpy as np
from PIL import Image


def _value_noise(rng, h, w, cell):
    gh, gw = h // cell + 2, w // cell + 2
    grid = rng.random((gh, gw))
    ys = np.arange(h) / cell
    xs = np.arange(w) / cell
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = grid[y0][:, x0]
    b = grid[y0][:, x0 + 1]
    c = grid[y0 + 1][:, x0]
    d = grid[y0 + 1][:, x0 + 1]
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy


def render_scene(seed, size):
    rng = np.random.default_rng(seed)
    h = w = size
    img = np.zeros((h, w, 3))
    depth = np.ones((h, w))

    horizon = int(h * rng.uniform(0.35, 0.55))
    rows = np.arange(h)[:, None]

    # Sky: vertical gradient with soft clouds.
    top = np.array([0.25, 0.45, 0.85]) + rng.uniform(-0.08, 0.08, 3)
    bottom = np.array([0.75, 0.85, 0.95])
    f = np.clip(rows / max(horizon, 1), 0, 1)[..., None]
    sky = top * (1 - f) + bottom * f
    clouds = _value_noise(rng, h, w, 16)[..., None]
    sky = sky * (1 - 0.35 * clouds) + 0.35 * clouds
    img[:] = np.broadcast_to(sky, (h, w, 3))

    # Ground plane: depth shrinks linearly from the horizon to the bottom edge.
    ground_col = np.array([0.30, 0.45, 0.20]) + rng.uniform(-0.1, 0.1, 3)
    tex = _value_noise(rng, h, w, 4)[..., None]
    ground = np.clip(ground_col * (0.75 + 0.5 * tex), 0, 1)
    gmask = rows >= horizon
    gdepth = 0.9 * (1.0 - (rows - horizon) / max(h - horizon, 1)) + 0.05
    img = np.where(gmask[..., None], ground, img)
    depth = np.where(gmask, np.broadcast_to(gdepth, (h, w)), depth)

    # Road wedge.
    if rng.random() < 0.6:
        cx = w * rng.uniform(0.3, 0.7)
        for y in range(horizon, h):
            half = 2 + (y - horizon) * rng.uniform(0.45, 0.55)
            x0, x1 = int(max(cx - half, 0)), int(min(cx + half, w))
            img[y, x0:x1] = [0.35, 0.35, 0.37]

    # Buildings, far to near so nearer ones overwrite.
    n_build = rng.integers(3, 7)
    bdepths = np.sort(rng.uniform(0.3, 0.85, n_build))[::-1]
    for bd in bdepths:
        bw = int(w * rng.uniform(0.1, 0.25))
        bh = int(h * rng.uniform(0.15, 0.45) * (1.2 - bd))
        x0 = int(rng.uniform(0, w - bw))
        base = horizon + int((1 - bd) * (h - horizon) * 0.3)
        y0 = max(base - bh, 0)
        col = rng.uniform(0.35, 0.9, 3)
        img[y0:base, x0:x0 + bw] = col
        # Window grid.
        step = max(3, bw // 5)
        win = rng.uniform(0.05, 0.25, 3)
        for wy in range(y0 + 2, base - 2, step):
            for wx in range(x0 + 2, x0 + bw - 2, step):
                img[wy:wy + max(1, step // 2), wx:wx + max(1, step // 2)] = win
        depth[y0:base, x0:x0 + bw] = bd

    # Trees in the foreground.
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(1, 4)):
        r = rng.uniform(0.05, 0.1) * w
        cx = rng.uniform(0, w)
        cy = rng.uniform(horizon, h * 0.85)
        td = float(np.clip(0.9 * (1.0 - (cy - horizon) / max(h - horizon, 1)), 0.05, 0.6))
        trunk = (abs(xx - cx) < r * 0.2) & (yy > cy) & (yy < cy + 2.2 * r)
        crown = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
        img[trunk] = [0.35, 0.22, 0.1]
        shade = 0.7 + 0.3 * _value_noise(rng, h, w, 3)
        leaves = np.stack([0.1 * shade, 0.5 * shade, 0.12 * shade], -1)
        img[crown] = leaves[crown]
        depth[trunk | crown] = td

    return np.clip(img, 0, 1), np.clip(depth, 0, 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "fixtures"))
    ap.add_argument("--scenes", type=int, default=8)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--seed", type=int, default=20211)
    args = ap.parse_args()

    os.makedirs(os.path.join(args.out, "clear"), exist_ok=True)
    os.makedirs(os.path.join(args.out, "depth"), exist_ok=True)
    for i in range(args.scenes):
        scene_id = f"{1001 + i:04d}"
        img, depth = render_scene(args.seed + i, args.size)
        Image.fromarray(np.round(img * 255).astype(np.uint8)).save(
            os.path.join(args.out, "clear", scene_id + ".png"))
        Image.fromarray(np.round(depth * 255).astype(np.uint8)).save(
            os.path.join(args.out, "depth", scene_id + ".png"))


if __name__ == "__main__":
    main()
