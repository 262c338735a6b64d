"""File formats used by the command line: 8-bit sRGB PNG images, mask PNGs,
plain-text kernels, CSV tables, raw ``.npy`` dumps and JSON run manifests.

Outputs are staged in memory by :class:`OutputSet` and written only once a
command has succeeded, so a failing run leaves no partial files behind.
"""

import csv
import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np
from PIL import Image

from ._validation import check_image
from .image import from_uint8, to_uint8
from .operators import BlurKernel


def read_png(path):
    """Load an image as an (H, W, 3) float array in [0, 1]; alpha is dropped."""
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def png_bytes(img):
    """Clamped, 8-bit PNG encoding of an (H, W, 3) float image."""
    buf = io.BytesIO()
    Image.fromarray(to_uint8(check_image(img))).save(buf, format="PNG")
    return buf.getvalue()


def gray_png_bytes(plane):
    """PNG of a scalar plane scaled by its maximum (all-zero planes stay black)."""
    plane = np.asarray(plane, dtype=np.float64)
    top = plane.max() if plane.size else 0.0
    scaled = plane / top if top > 0 else np.zeros_like(plane)
    buf = io.BytesIO()
    Image.fromarray(np.rint(np.clip(scaled, 0, 1) * 255).astype(np.uint8)).save(
        buf, format="PNG"
    )
    return buf.getvalue()


def read_mask_png(path):
    """Observed-pixel mask: nonzero luminance means observed."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def mask_png_bytes(mask):
    buf = io.BytesIO()
    Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)).save(
        buf, format="PNG"
    )
    return buf.getvalue()


def read_kernel(path):
    """Kernel from rows of whitespace-separated numbers, anchored at its centre.

    Taps are rescaled to sum to 1 (text files rarely store them exactly).
    """
    taps = np.loadtxt(path, ndmin=2)
    total = taps.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError(f"kernel in {path} must have a positive sum")
    return BlurKernel.from_taps(taps, normalize=True)


def kernel_text(kernel):
    buf = io.StringIO()
    np.savetxt(buf, kernel.taps, fmt="%.17g")
    return buf.getvalue()


def npy_bytes(arr):
    buf = io.BytesIO()
    np.save(buf, np.asarray(arr), allow_pickle=False)
    return buf.getvalue()


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_text(manifest):
    return json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.ndarray, tuple)):
        return list(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class OutputSet:
    """Collect named outputs and write them together.

    ``commit`` writes every file to a temporary sibling first and renames
    afterwards, so either all outputs appear or none do.
    """

    def __init__(self):
        self._items = {}

    def add(self, path, data):
        if path is None:
            return
        self._items[Path(path)] = data.encode() if isinstance(data, str) else bytes(data)

    @property
    def paths(self):
        return list(self._items)

    def commit(self):
        staged = []
        try:
            for path, data in self._items.items():
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
                tmp.write_bytes(data)
                staged.append((tmp, path))
        except BaseException:
            for tmp, _ in staged:
                tmp.unlink(missing_ok=True)
            raise
        for tmp, path in staged:
            os.replace(tmp, path)
        return [p for _, p in staged]
