"""On-disk layout: binary PPM (P6) images plus one manifest.json per split.

Manifest schema::

    {"schema_version": 1, "split": ..., "seed": ..., "config": {...},
     "categories": [name, ...], "families": [family_index, ...],
     "samples": [{"id": ..., "image": "images/<id>.ppm",
                  "boxes": [[x0, y0, x1, y1, category], ...]}, ...]}
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .generator import CategorySet, DatasetError, DatasetManifest, ImageSample
from .geometry import Annotation, BBox


def write_ppm(path, pixels: np.ndarray) -> None:
    """pixels: (3, H, W) float32 in [0,1] on the uint8/255 grid."""
    u8 = np.rint(pixels * 255.0).astype(np.uint8).transpose(1, 2, 0)
    h, w, _ = u8.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(u8.tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    try:
        # header: magic, width, height, maxval, single whitespace, then raster
        fields = []
        pos = 0
        while len(fields) < 4:
            while pos < len(raw) and raw[pos:pos + 1].isspace():
                pos += 1
            if raw[pos:pos + 1] == b"#":
                while raw[pos:pos + 1] not in (b"\n", b""):
                    pos += 1
                continue
            start = pos
            while pos < len(raw) and not raw[pos:pos + 1].isspace():
                pos += 1
            fields.append(raw[start:pos])
        pos += 1
        magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    except (ValueError, IndexError) as exc:
        raise DatasetError(f"{path}: not a valid PPM header") from exc
    if magic != b"P6" or maxval != 255:
        raise DatasetError(f"{path}: expected binary P6 maxval 255")
    data = raw[pos:pos + w * h * 3]
    if len(data) != w * h * 3:
        raise DatasetError(f"{path}: truncated raster, expected {w*h*3} bytes got {len(data)}")
    u8 = np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3)
    return (u8.astype(np.float32) / 255.0).transpose(2, 0, 1)


def save_dataset(manifest: DatasetManifest, directory) -> Path:
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    samples = []
    for s in manifest.samples:
        rel = f"images/{s.id}.ppm"
        write_ppm(directory / rel, s.pixels)
        boxes = [[a.box.x0, a.box.y0, a.box.x1, a.box.y1, a.category]
                 for a in s.annotations]
        samples.append({"id": s.id, "image": rel, "boxes": boxes})
    doc = {
        "schema_version": 1,
        "split": manifest.split,
        "seed": manifest.seed,
        "config": manifest.config,
        "categories": list(manifest.categories.names),
        "families": list(manifest.categories.family_of),
        "samples": samples,
    }
    out = directory / "manifest.json"
    out.write_text(json.dumps(doc, indent=1, sort_keys=True))
    return out


def load_dataset(directory) -> DatasetManifest:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.json under {directory}")
    doc = json.loads(manifest_path.read_text())
    if doc.get("schema_version") != 1:
        raise DatasetError(f"{manifest_path}: unsupported schema_version")
    categories = CategorySet(tuple(doc["categories"]), tuple(doc["families"]))
    samples = []
    for rec in doc["samples"]:
        img_path = directory / rec["image"]
        if not img_path.exists():
            raise DatasetError(f"sample {rec.get('id', '?')!r}: missing image {img_path}")
        pixels = read_ppm(img_path)
        annotations = []
        for b in rec["boxes"]:
            if len(b) != 5:
                raise DatasetError(f"sample {rec['id']!r}: malformed box record {b!r}")
            annotations.append(Annotation(BBox(b[0], b[1], b[2], b[3]), int(b[4])))
        samples.append(ImageSample(pixels=pixels, annotations=annotations, id=rec["id"]))
    return DatasetManifest(categories=categories, samples=samples, split=doc["split"],
                           seed=doc["seed"], config=doc["config"])
