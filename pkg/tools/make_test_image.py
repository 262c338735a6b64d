"""Regenerate the bundled sharp test image (src/dovtv/data/shapes.png)."""

from pathlib import Path

import numpy as np
from PIL import Image

SIZE = 96


def render(size=SIZE):
    y, x = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.stack([0.25 + 0.5 * x, 0.35 + 0.3 * y, 0.7 - 0.4 * x * y], axis=-1)
    disk = (x - 0.3) ** 2 + (y - 0.32) ** 2 < 0.18**2
    img[disk] = (0.85, 0.2, 0.15)
    square = (np.abs(x - 0.72) < 0.16) & (np.abs(y - 0.3) < 0.12)
    img[square] = (0.1, 0.55, 0.25)
    stripes = (y > 0.62) & (y < 0.9) & (x > 0.08) & (x < 0.55)
    img[stripes & (np.floor(x * 18) % 2 == 0)] = (0.95, 0.9, 0.2)
    tri = (y > 0.55) & (y < 0.92) & (x - 0.62 > 0.9 - y) & (x < 0.94)
    img[tri] = (0.2, 0.25, 0.8)
    return np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "dovtv" / "data" / "shapes.png"
    Image.fromarray(render()).save(out)
    print(out)
