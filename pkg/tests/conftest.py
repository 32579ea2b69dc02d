import numpy as np
import pytest
from PIL import Image

from featinject.imgio import ImageGray, ImageRGB


def rgb(array) -> ImageRGB:
    return ImageRGB(np.asarray(array, dtype=np.uint8))


def gray(array) -> ImageGray:
    return ImageGray(np.asarray(array, dtype=np.uint8))


def random_rgb(rng, h=16, w=16) -> ImageRGB:
    return ImageRGB(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8).astype(np.uint8))


def random_gray(rng, h=16, w=16) -> ImageGray:
    return ImageGray(rng.integers(0, 256, size=(h, w), dtype=np.uint8).astype(np.uint8))


def write_png(path, array) -> None:
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path)


@pytest.fixture
def tiny_dataset(tmp_path):
    """3 classes x 2 solid-color 8x8 images, plus one non-image file."""
    rng = np.random.default_rng(0)
    root = tmp_path / "data"
    for name in ("alpha", "beta", "gamma"):
        d = root / name
        d.mkdir(parents=True)
        for i in range(2):
            write_png(d / f"{name}_{i}.png", rng.integers(0, 256, size=(8, 8, 3)))
    (root / "alpha" / "notes.txt").write_text("not an image")
    return root
