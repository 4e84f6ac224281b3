"""Seeded desk-scale segmentation tasks and the PDNS sample file format.

Both tasks put a 1-pixel ignore border (label 255) around the image.

local:   every interior label is a quantile bucket of the 3x3 mean channel sum,
         so a radius-1 model can solve it exactly.
context: a 3x3 colored cue encodes class c in 1..K-1; a white 3x3 blob whose
         center is exactly Chebyshev distance d from the cue center is
         labelled c. The blob looks the same for every c and the background
         noise is drawn independently of c, so nothing within distance
         d - 2 of a blob pixel carries information about its label.
"""
from __future__ import annotations

import colorsys
import struct
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .errors import ConfigError, DataError
from .network import IGNORE_LABEL

MAGIC = b"PDNS"
VERSION = 1
HALF = 1  # cue and blob are (2*HALF+1)-pixel squares
BACKGROUND_MAX = 0.0
BLOB_COLOR = (1.0, 1.0, 1.0)


@dataclass
class Sample:
    image: np.ndarray  # (rows, cols, 3) in [0, 1]
    labels: np.ndarray  # (rows, cols) ints, 255 = ignore
    metadata: dict = field(default_factory=dict)


def _border(labels: np.ndarray) -> np.ndarray:
    labels[0, :] = labels[-1, :] = IGNORE_LABEL
    labels[:, 0] = labels[:, -1] = IGNORE_LABEL
    return labels


def local_thresholds(K: int) -> np.ndarray:
    # the 3x3 mean of a channel sum of iid U(0,1) pixels has mean 1.5 and sd 1/6
    nd = NormalDist(1.5, 1.0 / 6.0)
    return np.array([nd.inv_cdf(j / K) for j in range(1, K)])


def local_rule(patch: np.ndarray, K: int) -> int:
    """Label of the center pixel of a (3, 3, 3) patch."""
    return int(np.searchsorted(local_thresholds(K), patch.sum(axis=2).mean(), side="right"))


def gen_local_task(seed: int, size: int, K: int) -> Sample:
    if size < 8 or K < 2:
        raise ConfigError(f"local task needs size >= 8 and K >= 2, got size={size}, K={K}")
    rng = np.random.default_rng([seed, size, K])
    image = rng.random((size, size, 3)).astype(np.float32).astype(np.float64)
    s = image.sum(axis=2)
    box = sum(s[1 + dr:size - 1 + dr, 1 + dc:size - 1 + dc]
              for dr in (-1, 0, 1) for dc in (-1, 0, 1)) / 9.0
    labels = np.full((size, size), IGNORE_LABEL, dtype=np.int64)
    labels[1:-1, 1:-1] = np.searchsorted(local_thresholds(K), box, side="right")
    return Sample(image, _border(labels), {"task": "local", "seed": seed, "distance": 0})


def cue_color(c: int, K: int) -> np.ndarray:
    """Saturated hue for class c in 1..K-1, rounded to float32 like stored images."""
    rgb = colorsys.hsv_to_rgb((c - 1) / (K - 1) * (2.0 / 3.0), 1.0, 1.0)
    return np.array(rgb, dtype=np.float32).astype(np.float64)


def _placements(size: int, d: int):
    lo, hi = 1 + HALF, size - 2 - HALF
    centers = range(lo, hi + 1)
    return [((br, bc), (cr, cc))
            for br in centers for bc in centers
            for cr in centers for cc in centers
            if max(abs(br - cr), abs(bc - cc)) == d]


def gen_context_task(seed: int, size: int, K: int, distance: int) -> Sample:
    if K < 2:
        raise ConfigError(f"context task needs K >= 2, got {K}")
    if distance < 0:
        raise ConfigError(f"cue distance must be non-negative, got {distance}")
    options = _placements(size, distance)
    if not options:
        raise ConfigError(f"cannot place cue and blob {distance} apart on a {size}x{size} image")
    rng = np.random.default_rng([seed, size, K, distance])
    c = int(rng.integers(1, K))
    (br, bc), (cr, cc) = options[int(rng.integers(len(options)))]
    image = rng.uniform(0.0, BACKGROUND_MAX, (size, size, 3))
    labels = np.zeros((size, size), dtype=np.int64)
    blob = (slice(br - HALF, br + HALF + 1), slice(bc - HALF, bc + HALF + 1))
    image[blob] = BLOB_COLOR
    labels[blob] = c
    image[cr - HALF:cr + HALF + 1, cc - HALF:cc + HALF + 1] = cue_color(c, K)
    image = image.astype(np.float32).astype(np.float64)
    meta = {"task": "context", "seed": seed, "distance": distance, "class": c,
            "blob_center": (br, bc), "cue_center": (cr, cc)}
    return Sample(image, _border(labels), meta)


def blob_mask(labels: np.ndarray) -> np.ndarray:
    return (labels != IGNORE_LABEL) & (labels > 0)


def audit_context_sample(sample: Sample, K: int) -> dict:
    """Recover class and cue distance from the stored pixels and labels alone."""
    blob = blob_mask(sample.labels)
    classes = np.unique(sample.labels[blob])
    if len(classes) != 1:
        raise DataError(f"expected one blob class, found {classes.tolist()}")
    c = int(classes[0])
    cue = np.all(np.isclose(sample.image, cue_color(c, K)), axis=2)
    if not cue.any():
        raise DataError("no cue pixels found")
    bcen = np.argwhere(blob).mean(axis=0)
    ccen = np.argwhere(cue).mean(axis=0)
    dist = np.abs(bcen - ccen).max()
    if dist != round(dist):
        raise DataError(f"cue/blob centers are not on the grid: {bcen}, {ccen}")
    return {"class": c, "distance": int(round(dist)),
            "blob_center": tuple(int(v) for v in bcen), "cue_center": tuple(int(v) for v in ccen)}


def encode_sample(sample: Sample) -> bytes:
    rows, cols = sample.labels.shape
    if sample.image.shape != (rows, cols, 3):
        raise DataError(f"image shape {sample.image.shape} does not match labels {sample.labels.shape}")
    head = MAGIC + struct.pack("<III", VERSION, rows, cols)
    return (head + np.ascontiguousarray(sample.image, dtype="<f4").tobytes()
            + np.ascontiguousarray(sample.labels, dtype="<u2").tobytes())


def decode_sample(data: bytes) -> Sample:
    if len(data) < 16 or data[:4] != MAGIC:
        raise DataError("not a PDNS sample (bad magic)")
    version, rows, cols = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise DataError(f"unsupported PDNS version {version}")
    n_img, n_lab = rows * cols * 3 * 4, rows * cols * 2
    if len(data) != 16 + n_img + n_lab:
        raise DataError(f"PDNS size {len(data)} does not match a {rows}x{cols} sample")
    image = np.frombuffer(data, "<f4", rows * cols * 3, 16).reshape(rows, cols, 3)
    labels = np.frombuffer(data, "<u2", rows * cols, 16 + n_img).reshape(rows, cols)
    return Sample(image.astype(np.float64), labels.astype(np.int64))


def save_sample(sample: Sample, path) -> None:
    Path(path).write_bytes(encode_sample(sample))


def load_sample(path) -> Sample:
    return decode_sample(Path(path).read_bytes())


def generate(task: str, n: int, seed: int, size: int, K: int, distance: int = 6) -> list:
    """n samples; sample i uses seed `seed + i`."""
    if task == "local":
        return [gen_local_task(seed + i, size, K) for i in range(n)]
    if task == "context":
        return [gen_context_task(seed + i, size, K, distance) for i in range(n)]
    raise ConfigError(f"unknown task {task!r}; expected 'local' or 'context'")


def write_dataset(samples, out_dir) -> list:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out}: {exc}") from exc
    paths = []
    for i, s in enumerate(samples):
        p = out / f"sample_{i}.pdns"
        try:
            save_sample(s, p)
        except OSError as exc:
            raise DataError(f"cannot write {p}: {exc}") from exc
        paths.append(p)
    return paths


def read_dataset(data_dir) -> list:
    d = Path(data_dir)
    if not d.is_dir():
        raise DataError(f"data directory {d} does not exist")
    files = sorted(d.glob("sample_*.pdns"), key=lambda p: int(p.stem.split("_")[1]))
    return [load_sample(p) for p in files]
