"""Procedural 10-class textured image set.

A self-contained stand-in for the satellite benchmark: ten texture
families (stripes, checkers, noise grains, rings, ramps, ...) with
per-image random phase, scale, and colors.  Class identity lives mostly in
second-order texture structure, which keeps the set hard for raw-pixel
embeddings and easy for the traditional extractors, so injection effects
are visible at desk scale.  Generation is deterministic in the seed.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

from .embed import EmbeddingStore, synthetic_backbone, write_embeddings_file
from .imgio import DatasetManifest, load_image, scan_dataset

FIXTURE_CLASSES = (
    "checker",
    "diagstripes",
    "dots",
    "flatcast",
    "gradient",
    "hstripes",
    "noisefine",
    "noisesmooth",
    "rings",
    "waves",
)


def _colors(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two random colors with enough separation to keep texture visible."""
    while True:
        c0 = rng.integers(0, 256, size=3).astype(np.float64)
        c1 = rng.integers(0, 256, size=3).astype(np.float64)
        if np.abs(c0 - c1).sum() >= 160:
            return c0, c1


def _colorize(mask: np.ndarray, rng: np.random.Generator, noise: float = 12.0) -> np.ndarray:
    c0, c1 = _colors(rng)
    img = c0 + mask[:, :, None] * (c1 - c0)
    img = img + rng.normal(0.0, noise, size=img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    y, x = np.mgrid[0:size, 0:size]
    return y.astype(np.float64), x.astype(np.float64)


def _checker(rng, size):
    cell = int(rng.integers(4, 10))
    oy, ox = rng.integers(0, cell, size=2)
    y, x = _grid(size)
    mask = ((((y + oy) // cell) + ((x + ox) // cell)) % 2).astype(np.float64)
    return _colorize(mask, rng)


def _diagstripes(rng, size):
    period = int(rng.integers(4, 10))
    phase = int(rng.integers(0, period))
    y, x = _grid(size)
    mask = (((x + y + phase) // period) % 2).astype(np.float64)
    return _colorize(mask, rng)


def _dots(rng, size):
    spacing = int(rng.integers(6, 12))
    radius = int(rng.integers(1, 3))
    oy, ox = rng.integers(0, spacing, size=2)
    y, x = _grid(size)
    mask = (((y + oy) % spacing < radius) & ((x + ox) % spacing < radius)).astype(np.float64)
    return _colorize(mask, rng, noise=6.0)


def _flatcast(rng, size):
    mask = np.zeros((size, size))
    return _colorize(mask, rng, noise=5.0)


def _gradient(rng, size):
    angle = rng.uniform(0.0, 2.0 * np.pi)
    y, x = _grid(size)
    proj = x * np.cos(angle) + y * np.sin(angle)
    mask = (proj - proj.min()) / max(proj.max() - proj.min(), 1e-9)
    return _colorize(mask, rng, noise=4.0)


def _hstripes(rng, size):
    period = int(rng.integers(3, 9))
    phase = int(rng.integers(0, period))
    y, _ = _grid(size)
    mask = (((y + phase) // period) % 2).astype(np.float64)
    return _colorize(mask, rng)


def _noisefine(rng, size):
    img = rng.integers(0, 256, size=(size, size, 3))
    return img.astype(np.uint8)


def _noisesmooth(rng, size):
    # box-blurred noise, contrast-stretched per channel
    k = 7
    raw = rng.uniform(0.0, 1.0, size=(size + k, size + k, 3))
    c = raw.cumsum(axis=0).cumsum(axis=1)
    blurred = (
        c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]
    )[:size, :size] / (k * k)
    lo = blurred.min(axis=(0, 1), keepdims=True)
    hi = blurred.max(axis=(0, 1), keepdims=True)
    img = (blurred - lo) / np.maximum(hi - lo, 1e-9) * 255.0
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def _rings(rng, size):
    wavelength = rng.uniform(4.0, 9.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    cy, cx = rng.uniform(size * 0.25, size * 0.75, size=2)
    y, x = _grid(size)
    r = np.hypot(y - cy, x - cx)
    mask = 0.5 + 0.5 * np.sin(2.0 * np.pi * r / wavelength + phase)
    return _colorize(mask, rng, noise=8.0)


def _waves(rng, size):
    wavelength = rng.uniform(6.0, 14.0)
    angle = rng.uniform(0.0, np.pi)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    y, x = _grid(size)
    proj = x * np.cos(angle) + y * np.sin(angle)
    mask = 0.5 + 0.5 * np.sin(2.0 * np.pi * proj / wavelength + phase)
    return _colorize(mask, rng, noise=8.0)


_GENERATORS = {
    "checker": _checker,
    "diagstripes": _diagstripes,
    "dots": _dots,
    "flatcast": _flatcast,
    "gradient": _gradient,
    "hstripes": _hstripes,
    "noisefine": _noisefine,
    "noisesmooth": _noisesmooth,
    "rings": _rings,
    "waves": _waves,
}


def generate_fixture(
    root: str | Path, per_class: int = 100, size: int = 64, seed: int = 7
) -> DatasetManifest:
    """Write the textured dataset in class-per-subdirectory layout as PNGs."""
    root = Path(root)
    for class_index, name in enumerate(FIXTURE_CLASSES):
        class_dir = root / name
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence((seed, class_index, i)))
            )
            pixels = _GENERATORS[name](rng, size)
            Image.fromarray(pixels, mode="RGB").save(class_dir / f"{name}_{i:04d}.png")
    return scan_dataset(root)


def build_synthetic_store(
    manifest: DatasetManifest, dim: int = 512, seed: int = 1234, backbone: str = "synthetic"
) -> EmbeddingStore:
    """Run the synthetic backbone over every manifest image."""
    store = EmbeddingStore.empty(backbone, dim)
    for image_id, _ in manifest.records:
        img = load_image(manifest.root / image_id)
        store.add(image_id, synthetic_backbone(img, dim, seed))
    return store


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m featinject.fixture",
        description="Generate the bundled 10-class textured dataset and optional synthetic embeddings.",
    )
    parser.add_argument("--out", required=True, help="dataset root directory to create")
    parser.add_argument("--per-class", type=int, default=100)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--embeddings", help="also write a synthetic EMB1 file here")
    parser.add_argument("--dim", type=int, default=512, help="synthetic embedding width")
    parser.add_argument("--emb-seed", type=int, default=1234)
    args = parser.parse_args(argv)

    manifest = generate_fixture(args.out, per_class=args.per_class, size=args.size, seed=args.seed)
    print(f"wrote {len(manifest.records)} images in {len(manifest.classes)} classes under {args.out}")
    if args.embeddings:
        store = build_synthetic_store(manifest, dim=args.dim, seed=args.emb_seed)
        n = write_embeddings_file(store, args.embeddings)
        print(f"wrote {len(store.records)} embeddings ({n} bytes) to {args.embeddings}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
