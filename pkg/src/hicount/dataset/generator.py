"""Synthetic multi-object scenes with family-structured categories.

Categories come in visual families: members of a family share a color
band and overall massing and differ only in fine geometry (vertex count,
hole, bar angle), while different families differ grossly. Rendering is
pure NumPy: shapes are rasterized on a 4x supersampled grid and averaged
down, so edges are soft and small shapes stay genuinely confusable.

Determinism contract: image ``i`` of a split draws from
``numpy.random.default_rng([seed, split_id, i])`` (train=0, test=1) and
its first draw is the object count, uniform on [0, max_objects].
"""
from __future__ import annotations

import colorsys
from dataclasses import dataclass, field

import numpy as np
from matplotlib.path import Path as MplPath

from .geometry import Annotation, BBox, iou_matrix

SUPERSAMPLE = 4
SPLIT_IDS = {"train": 0, "test": 1}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class CategorySet:
    names: tuple[str, ...]
    family_of: tuple[int, ...]

    def __post_init__(self):
        if len(self.names) != len(self.family_of):
            raise DatasetError("names and family_of must align")

    def families(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {}
        for cat, fam in enumerate(self.family_of):
            out.setdefault(fam, []).append(cat)
        return {fam: tuple(cats) for fam, cats in sorted(out.items())}


def default_category_set() -> CategorySet:
    # three families: warm polygons, green rounds, blue crosses
    return CategorySet(
        names=("triangle", "square", "pentagon", "disk", "ellipse", "ring", "plus", "cross"),
        family_of=(0, 0, 0, 1, 1, 1, 2, 2),
    )


@dataclass(frozen=True)
class DatasetConfig:
    num_images: int = 100
    image_size: int = 64
    max_objects: int = 5
    categories: CategorySet = field(default_factory=default_category_set)
    max_overlap_iou: float = 0.3
    placement_retries: int = 40

    def __post_init__(self):
        if self.image_size < 32:
            raise DatasetError(f"image_size must be >= 32, got {self.image_size}")
        fams = self.categories.families()
        if len(fams) < 2 or any(len(cats) < 2 for cats in fams.values()):
            raise DatasetError("need >= 2 families with >= 2 categories each")


@dataclass
class ImageSample:
    pixels: np.ndarray  # (3, H, W) float32 in [0, 1], exactly uint8/255
    annotations: list[Annotation]
    id: str


@dataclass
class DatasetManifest:
    categories: CategorySet
    samples: list[ImageSample]
    split: str
    seed: int
    config: dict


# --------------------------------------------------------------- rasterizer

_FAMILY_HUE = {0: (0.96, 1.07), 1: (0.30, 0.43), 2: (0.55, 0.68)}  # wraps mod 1


def _regular_polygon(cx, cy, r, n, theta):
    ang = theta + 2 * np.pi * np.arange(n) / n
    return np.stack([cx + r * np.cos(ang), cy + r * np.sin(ang)], axis=1)


def _bar(cx, cy, half_len, half_w, theta):
    c, s = np.cos(theta), np.sin(theta)
    dx = np.array([c, s]) * half_len
    dy = np.array([-s, c]) * half_w
    center = np.array([cx, cy])
    return np.stack([center + dx + dy, center + dx - dy, center - dx - dy, center - dx + dy])


def _shape_geometry(name: str, cx: float, cy: float, r: float, theta: float, aspect: float):
    """Returns (polygons, ellipses, tight bbox) in continuous pixel coords.

    ellipses are (cx, cy, rx, ry, theta, sign); sign -1 carves a hole.
    """
    polys, ells = [], []
    if name in ("triangle", "square", "pentagon"):
        n = {"triangle": 3, "square": 4, "pentagon": 5}[name]
        v = _regular_polygon(cx, cy, r, n, theta)
        polys.append(v)
        x0, y0 = v.min(axis=0)
        x1, y1 = v.max(axis=0)
    elif name == "disk":
        rr = 0.9 * r
        ells.append((cx, cy, rr, rr, 0.0, +1))
        x0, y0, x1, y1 = cx - rr, cy - rr, cx + rr, cy + rr
    elif name == "ellipse":
        rx, ry = r, r / aspect
        ells.append((cx, cy, rx, ry, theta, +1))
        ex = np.hypot(rx * np.cos(theta), ry * np.sin(theta))
        ey = np.hypot(rx * np.sin(theta), ry * np.cos(theta))
        x0, y0, x1, y1 = cx - ex, cy - ey, cx + ex, cy + ey
    elif name == "ring":
        ro = 0.9 * r
        ells.append((cx, cy, ro, ro, 0.0, +1))
        ells.append((cx, cy, 0.5 * ro, 0.5 * ro, 0.0, -1))
        x0, y0, x1, y1 = cx - ro, cy - ro, cx + ro, cy + ro
    elif name in ("plus", "cross"):
        b1 = _bar(cx, cy, 0.95 * r, 0.28 * r, theta)
        b2 = _bar(cx, cy, 0.95 * r, 0.28 * r, theta + np.pi / 2)
        polys.extend([b1, b2])
        allv = np.concatenate([b1, b2])
        x0, y0 = allv.min(axis=0)
        x1, y1 = allv.max(axis=0)
    else:
        raise DatasetError(f"unknown shape {name!r}")
    return polys, ells, (float(x0), float(y0), float(x1), float(y1))


def _alpha_mask(polys, ells, bbox, image_size) -> tuple[np.ndarray, tuple[int, int]]:
    """Coverage in [0,1] per pixel over the bbox region, supersampled."""
    ss = SUPERSAMPLE
    px0 = max(int(np.floor(bbox[0])), 0)
    py0 = max(int(np.floor(bbox[1])), 0)
    px1 = min(int(np.ceil(bbox[2])), image_size)
    py1 = min(int(np.ceil(bbox[3])), image_size)
    w, h = px1 - px0, py1 - py0
    if w <= 0 or h <= 0:
        return np.zeros((0, 0)), (py0, px0)
    xs = px0 + (np.arange(w * ss) + 0.5) / ss
    ys = py0 + (np.arange(h * ss) + 0.5) / ss
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = np.zeros(len(pts), dtype=bool)
    for v in polys:
        inside |= MplPath(v).contains_points(pts)
    for cx, cy, rx, ry, theta, sign in ells:
        c, s = np.cos(theta), np.sin(theta)
        dx, dy = pts[:, 0] - cx, pts[:, 1] - cy
        u = (dx * c + dy * s) / rx
        vq = (-dx * s + dy * c) / ry
        hit = u * u + vq * vq <= 1.0
        if sign > 0:
            inside |= hit
        else:
            inside &= ~hit
    sub = inside.reshape(h, ss, w, ss).astype(np.float64)
    return sub.mean(axis=(1, 3)), (py0, px0)


def _sample_color(rng, family: int) -> np.ndarray:
    lo, hi = _FAMILY_HUE[family]
    hue = rng.uniform(lo, hi) % 1.0
    sat = rng.uniform(0.65, 0.95)
    val = rng.uniform(0.65, 0.95)
    return np.array(colorsys.hsv_to_rgb(hue, sat, val))


def _render_image(rng, cfg: DatasetConfig, sample_id: str) -> ImageSample:
    size = cfg.image_size
    cats = cfg.categories
    n_objects = int(rng.integers(0, cfg.max_objects + 1))  # documented first draw

    base = rng.uniform(0.06, 0.14)
    canvas = np.full((size, size, 3), base, dtype=np.float64)

    placed: list[np.ndarray] = []
    annotations: list[Annotation] = []
    for _ in range(n_objects):
        cat = int(rng.integers(0, len(cats.names)))
        name = cats.names[cat]
        family = cats.family_of[cat]
        r = rng.uniform(8.0, 14.0)
        if name == "plus":
            theta = rng.uniform(-0.26, 0.26)
        elif name == "cross":
            theta = np.pi / 4 + rng.uniform(-0.26, 0.26)
        else:
            theta = rng.uniform(0, 2 * np.pi)
        aspect = rng.uniform(1.5, 1.9)
        color = _sample_color(rng, family)

        margin = r + 1.0
        for _ in range(cfg.placement_retries):
            cx = rng.uniform(margin, size - margin)
            cy = rng.uniform(margin, size - margin)
            polys, ells, bbox = _shape_geometry(name, cx, cy, r, theta, aspect)
            box = np.clip(np.array(bbox), 0, size)
            if box[2] - box[0] < 2 or box[3] - box[1] < 2:
                continue
            if placed and iou_matrix(box[None], np.stack(placed)).max() > cfg.max_overlap_iou:
                continue
            alpha, (oy, ox) = _alpha_mask(polys, ells, bbox, size)
            h, w = alpha.shape
            region = canvas[oy:oy + h, ox:ox + w]
            region[:] = region * (1 - alpha[..., None]) + color * alpha[..., None]
            placed.append(box)
            annotations.append(Annotation(BBox.from_array(box), cat))
            break
        # unsatisfiable placement: object silently dropped

    canvas += rng.normal(0.0, 0.015, size=canvas.shape)
    u8 = np.clip(np.rint(canvas * 255.0), 0, 255).astype(np.uint8)
    pixels = (u8.astype(np.float32) / 255.0).transpose(2, 0, 1)
    return ImageSample(pixels=pixels, annotations=annotations, id=sample_id)


def image_rng(seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, SPLIT_IDS[split], index])


def generate_dataset(seed: int, config: DatasetConfig, split: str = "train") -> DatasetManifest:
    """Deterministic synthetic dataset; same seed gives identical bytes."""
    if split not in SPLIT_IDS:
        raise DatasetError(f"split must be one of {sorted(SPLIT_IDS)}, got {split!r}")
    samples = []
    for i in range(config.num_images):
        rng = image_rng(seed, split, i)
        samples.append(_render_image(rng, config, f"{split}-{i:05d}"))
    echo = {
        "num_images": config.num_images,
        "image_size": config.image_size,
        "max_objects": config.max_objects,
        "max_overlap_iou": config.max_overlap_iou,
        "placement_retries": config.placement_retries,
    }
    return DatasetManifest(categories=config.categories, samples=samples,
                           split=split, seed=seed, config=echo)


def total_object_count(manifest: DatasetManifest) -> int:
    return sum(len(s.annotations) for s in manifest.samples)
