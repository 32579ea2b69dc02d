"""Traditional feature extractors.

Six feature groups computed from an RGB tile and assembled into one flat
vector in a fixed canonical order:

    mean (3) | glcm (5) | hu (7) | lbp (64) | hog (64) | colorinv (64)

All extractors are pure functions of the pixel data.  Histogram-type
groups are L1-normalized; degenerate inputs map to documented fixed
points rather than raising (zero-variance GLCM correlation := 1, HOG of a
gradient-free image := zero vector, Hu of an all-zero image := zeros,
atan2(0, 0) := 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ContractError, ExtractionError, FormatError
from .imgio import ImageGray, ImageRGB, to_gray


class FeatureGroup(Enum):
    MEAN = "mean"
    GLCM = "glcm"
    HU = "hu"
    LBP = "lbp"
    HOG = "hog"
    COLORINV = "colorinv"


# Canonical assembly order; extraction order never changes it.
GROUP_ORDER: tuple[FeatureGroup, ...] = (
    FeatureGroup.MEAN,
    FeatureGroup.GLCM,
    FeatureGroup.HU,
    FeatureGroup.LBP,
    FeatureGroup.HOG,
    FeatureGroup.COLORINV,
)

GROUP_WIDTHS: dict[FeatureGroup, int] = {
    FeatureGroup.MEAN: 3,
    FeatureGroup.GLCM: 5,
    FeatureGroup.HU: 7,
    FeatureGroup.LBP: 64,
    FeatureGroup.HOG: 64,
    FeatureGroup.COLORINV: 64,
}

TOTAL_WIDTH = sum(GROUP_WIDTHS.values())  # 207

# GLCM defaults: 64 gray levels, single horizontal offset (distance 1,
# angle 0), symmetric pair accumulation, normalized.
GLCM_LEVELS = 64
GLCM_OFFSET = (0, 1)

ORIENTATION_BINS = 64


@dataclass(frozen=True)
class FeatureSegment:
    """One extracted group: its tag and ordered values."""

    group: FeatureGroup
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        expected = GROUP_WIDTHS[self.group]
        if v.shape != (expected,):
            raise ContractError(
                f"{self.group.value} segment must have {expected} values, got {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ContractError(f"{self.group.value} segment contains non-finite values")


@dataclass(frozen=True)
class FeatureVector:
    """Segments in canonical order plus their flat concatenation."""

    segments: tuple[FeatureSegment, ...]

    def __post_init__(self):
        order = [GROUP_ORDER.index(s.group) for s in self.segments]
        if order != sorted(order) or len(set(order)) != len(order):
            raise ContractError("feature segments must be unique and in canonical order")

    @property
    def flat(self) -> np.ndarray:
        if not self.segments:
            return np.zeros(0, dtype=np.float64)
        return np.concatenate([s.values for s in self.segments])

    def segment(self, group: FeatureGroup) -> FeatureSegment:
        for s in self.segments:
            if s.group is group:
                return s
        raise KeyError(group)


@dataclass(frozen=True)
class GLCM:
    """Normalized symmetric gray-level co-occurrence matrix."""

    levels: int
    matrix: np.ndarray


@dataclass(frozen=True)
class FeatureSelection:
    """Subset of feature groups to extract; empty = pure-CNN baseline."""

    included: frozenset[FeatureGroup]

    @classmethod
    def all(cls) -> "FeatureSelection":
        return cls(frozenset(GROUP_ORDER))

    @classmethod
    def none(cls) -> "FeatureSelection":
        return cls(frozenset())

    @classmethod
    def of(cls, *groups: FeatureGroup) -> "FeatureSelection":
        return cls(frozenset(groups))

    @classmethod
    def parse(cls, text: str) -> "FeatureSelection":
        """Parse a comma list of group names, or the words 'all' / 'none'."""
        text = text.strip().lower()
        if text in ("all", "*"):
            return cls.all()
        if text in ("none", ""):
            return cls.none()
        names = {g.value: g for g in FeatureGroup}
        groups = set()
        for token in text.split(","):
            token = token.strip()
            if token not in names:
                raise ContractError(
                    f"unknown feature group {token!r}; expected one of "
                    f"{', '.join(names)} or 'all'/'none'"
                )
            groups.add(names[token])
        return cls(frozenset(groups))

    def ordered(self) -> tuple[FeatureGroup, ...]:
        return tuple(g for g in GROUP_ORDER if g in self.included)

    @property
    def width(self) -> int:
        return sum(GROUP_WIDTHS[g] for g in self.included)

    def names(self) -> list[str]:
        return [g.value for g in self.ordered()]


def mean_features(img: ImageRGB) -> FeatureSegment:
    """Normalized sample mean of each color band, each in [0, 1]."""
    p = img.pixels.astype(np.float64)
    denom = 255.0 * img.width * img.height
    values = np.array([p[:, :, c].sum() / denom for c in range(3)])
    return FeatureSegment(FeatureGroup.MEAN, values)


def glcm_matrix(
    img: ImageGray,
    levels: int = GLCM_LEVELS,
    offset: tuple[int, int] = GLCM_OFFSET,
) -> GLCM:
    """Build a normalized symmetric co-occurrence matrix.

    Pixels are quantized to ``floor(value * levels / 256)``; co-occurring
    pairs at ``offset = (dy, dx)`` are accumulated in both directions and
    the matrix is normalized to sum to 1.
    """
    if levels < 2:
        raise ContractError(f"GLCM needs at least 2 levels, got {levels}")
    dy, dx = offset
    h, w = img.height, img.width
    if h - abs(dy) < 1 or w - abs(dx) < 1 or (dy == 0 and dx == 0):
        raise ExtractionError(
            f"image {w}x{h} cannot host GLCM offset (dy={dy}, dx={dx})"
        )
    q = (img.pixels.astype(np.int64) * levels) // 256
    ys0, ys1 = max(0, -dy), h - max(0, dy)
    xs0, xs1 = max(0, -dx), w - max(0, dx)
    a = q[ys0:ys1, xs0:xs1].ravel()
    b = q[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx].ravel()
    idx = np.concatenate([a * levels + b, b * levels + a])
    counts = np.bincount(idx, minlength=levels * levels).astype(np.float64)
    return GLCM(levels, (counts / counts.sum()).reshape(levels, levels))


def haralick_features(glcm: GLCM) -> FeatureSegment:
    """Second-order texture statistics of a normalized symmetric GLCM.

    Fixed output order: contrast, correlation, homogeneity, energy, ASM.
    Correlation uses the marginal mean/variance (equal by symmetry) and is
    defined as 1 when the marginal variance is zero.
    """
    p = np.asarray(glcm.matrix, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ContractError("GLCM matrix must be square")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ContractError(f"GLCM matrix must sum to 1, got {p.sum()!r}")
    if not np.allclose(p, p.T, atol=1e-9):
        raise ContractError("GLCM matrix must be symmetric")

    i = np.arange(p.shape[0], dtype=np.float64)
    diff2 = (i[:, None] - i[None, :]) ** 2
    contrast = float((p * diff2).sum())
    marginal = p.sum(axis=1)
    mu = float((i * marginal).sum())
    var = float((((i - mu) ** 2) * marginal).sum())
    if var == 0.0:
        correlation = 1.0
    else:
        correlation = float((p * np.outer(i - mu, i - mu)).sum() / var)
    homogeneity = float((p / (1.0 + diff2)).sum())
    asm = float((p * p).sum())
    energy = float(np.sqrt(asm))
    return FeatureSegment(
        FeatureGroup.GLCM,
        np.array([contrast, correlation, homogeneity, energy, asm]),
    )


def hu_moments(img: ImageGray) -> FeatureSegment:
    """Hu's seven moment invariants of the intensity image, signed-log compressed.

    Raw moments are taken on intensity (not binarized) with x = column and
    y = row; normalized central moments feed Hu's seven combinations, and
    each result h is compressed as ``-sign(h) * log10(|h|)`` with 0 -> 0.
    An all-zero image returns seven zeros.
    """
    a = img.pixels.astype(np.float64)
    m00 = a.sum()
    if m00 == 0.0:
        return FeatureSegment(FeatureGroup.HU, np.zeros(7))

    h, w = a.shape
    x = np.arange(w, dtype=np.float64)
    y = np.arange(h, dtype=np.float64)
    xbar = float(np.einsum("i,ji->", x, a)) / m00
    ybar = float(np.einsum("j,ji->", y, a)) / m00
    cx = x - xbar
    cy = y - ybar

    def mu(p: int, q: int) -> float:
        return float(np.einsum("j,ji,i->", cy**q, a, cx**p))

    eta = {
        (p, q): mu(p, q) / m00 ** (1.0 + (p + q) / 2.0)
        for p, q in [(2, 0), (0, 2), (1, 1), (3, 0), (0, 3), (2, 1), (1, 2)]
    }
    n20, n02, n11 = eta[(2, 0)], eta[(0, 2)], eta[(1, 1)]
    n30, n03, n21, n12 = eta[(3, 0)], eta[(0, 3)], eta[(2, 1)], eta[(1, 2)]

    h1 = n20 + n02
    h2 = (n20 - n02) ** 2 + 4.0 * n11**2
    h3 = (n30 - 3.0 * n12) ** 2 + (3.0 * n21 - n03) ** 2
    h4 = (n30 + n12) ** 2 + (n21 + n03) ** 2
    h5 = (n30 - 3.0 * n12) * (n30 + n12) * (
        (n30 + n12) ** 2 - 3.0 * (n21 + n03) ** 2
    ) + (3.0 * n21 - n03) * (n21 + n03) * (3.0 * (n30 + n12) ** 2 - (n21 + n03) ** 2)
    h6 = (n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2) + 4.0 * n11 * (
        n30 + n12
    ) * (n21 + n03)
    h7 = (3.0 * n21 - n03) * (n30 + n12) * (
        (n30 + n12) ** 2 - 3.0 * (n21 + n03) ** 2
    ) - (n30 - 3.0 * n12) * (n21 + n03) * (3.0 * (n30 + n12) ** 2 - (n21 + n03) ** 2)

    values = np.array([signed_log(v) for v in (h1, h2, h3, h4, h5, h6, h7)])
    return FeatureSegment(FeatureGroup.HU, values)


def signed_log(value: float) -> float:
    """Dynamic-range compression ``-sign(v) * log10(|v|)``, with 0 -> 0."""
    if value == 0.0:
        return 0.0
    return float(-np.sign(value) * np.log10(abs(value)))


# Neighbor offsets clockwise from the top-left corner; the first entry
# contributes the most significant bit of the 8-bit code.
_LBP_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def lbp_features(img: ImageGray) -> FeatureSegment:
    """Local binary pattern histogram folded 4:1 into 64 bins.

    Each interior pixel yields an 8-bit code (bit set when neighbor >=
    center, clockwise from top-left); bin k collects codes 4k..4k+3 and the
    histogram is L1-normalized.  Codes depend only on order comparisons, so
    the histogram is invariant under strictly increasing intensity remaps.
    """
    if img.width < 3 or img.height < 3:
        raise ExtractionError(f"LBP needs at least 3x3, got {img.width}x{img.height}")
    p = img.pixels
    center = p[1:-1, 1:-1]
    h, w = center.shape
    code = np.zeros(center.shape, dtype=np.int64)
    for dy, dx in _LBP_OFFSETS:
        neighbor = p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        code = (code << 1) | (neighbor >= center)
    hist = np.bincount((code >> 2).ravel(), minlength=64).astype(np.float64)
    return FeatureSegment(FeatureGroup.LBP, hist / code.size)


def orientation_bins(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Map direction vectors to 64 equal bins over [-pi, pi).

    The bin is ``floor((theta + pi) / (2 pi) * 64)`` for theta = atan2(y, x)
    wrapped into [-pi, pi), with atan2(0, 0) := 0.  The eight axis and
    diagonal directions sit exactly on bin boundaries and are resolved by
    sign/equality tests, so binning there is exact; for every other
    direction the float atan2 error is far smaller than the distance to a
    boundary.  Inputs are also rescaled by a power of two before atan2,
    which makes the result invariant under exact positive power-of-two
    scaling of both components.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    bins = np.empty(y.shape, dtype=np.int64)

    diag = np.abs(x) == np.abs(y)
    zy, zx = y == 0.0, x == 0.0
    exact = zy | zx | diag
    bins[zy & (x > 0)] = 32
    bins[diag & (x > 0) & (y > 0)] = 40
    bins[zx & (y > 0)] = 48
    bins[diag & (x < 0) & (y > 0)] = 56
    bins[zy & (x < 0)] = 0  # theta = +pi wraps to -pi
    bins[diag & (x < 0) & (y < 0)] = 8
    bins[zx & (y < 0)] = 16
    bins[diag & (x > 0) & (y < 0)] = 24
    bins[zy & zx] = 32  # atan2(0, 0) := 0

    rest = ~exact
    if np.any(rest):
        ry, rx = y[rest], x[rest]
        exponent = np.frexp(np.maximum(np.abs(ry), np.abs(rx)))[1]
        theta = np.arctan2(np.ldexp(ry, -exponent), np.ldexp(rx, -exponent))
        k = np.floor((theta + np.pi) * (ORIENTATION_BINS / (2.0 * np.pi)))
        bins[rest] = k.astype(np.int64) % ORIENTATION_BINS
    return bins


def hog_features(img: ImageGray) -> FeatureSegment:
    """Global magnitude-weighted histogram of gradient orientations.

    Central-difference gradients on interior pixels, orientation binned
    into 64 signed bins over [-pi, pi), weighted by gradient magnitude and
    L1-normalized.  A gradient-free image yields the zero vector.
    """
    if img.width < 3 or img.height < 3:
        raise ExtractionError(f"HOG needs at least 3x3, got {img.width}x{img.height}")
    p = img.pixels.astype(np.float64)
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy)
    if not np.any(mag):
        return FeatureSegment(FeatureGroup.HOG, np.zeros(ORIENTATION_BINS))
    bins = orientation_bins(gy, gx)
    hist = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=ORIENTATION_BINS)
    return FeatureSegment(FeatureGroup.HOG, hist / hist.sum())


# Gaussian color model: fixed linear map from RGB.
#   E        =  0.06 R + 0.63 G + 0.27 B
#   E_lambda =  0.30 R + 0.04 G - 0.35 B
#   E_ll     =  0.34 R - 0.60 G + 0.17 B
# The hue-like invariant angle is atan2(E_lambda, E_ll); it is unchanged
# when all channels are scaled by the same positive factor.


def color_invariant_features(img: ImageRGB) -> FeatureSegment:
    """64-bin histogram of the Gaussian-color-model invariant angle."""
    p = img.pixels.astype(np.float64)
    r, g, b = p[:, :, 0], p[:, :, 1], p[:, :, 2]
    e_lambda = 0.30 * r + 0.04 * g - 0.35 * b
    e_ll = 0.34 * r - 0.60 * g + 0.17 * b
    bins = orientation_bins(e_lambda, e_ll)
    hist = np.bincount(bins.ravel(), minlength=ORIENTATION_BINS).astype(np.float64)
    return FeatureSegment(FeatureGroup.COLORINV, hist / e_lambda.size)


_EXTRACTORS = {
    FeatureGroup.MEAN: lambda img, gray: mean_features(img),
    FeatureGroup.GLCM: lambda img, gray: haralick_features(glcm_matrix(gray)),
    FeatureGroup.HU: lambda img, gray: hu_moments(gray),
    FeatureGroup.LBP: lambda img, gray: lbp_features(gray),
    FeatureGroup.HOG: lambda img, gray: hog_features(gray),
    FeatureGroup.COLORINV: lambda img, gray: color_invariant_features(img),
}


def extract_all(img: ImageRGB, sel: FeatureSelection) -> FeatureVector:
    """Compute the selected groups and assemble them in canonical order."""
    needs_gray = bool(
        sel.included & {FeatureGroup.GLCM, FeatureGroup.HU, FeatureGroup.LBP, FeatureGroup.HOG}
    )
    gray = to_gray(img) if needs_gray else None
    segments = []
    for group in sel.ordered():
        try:
            segments.append(_EXTRACTORS[group](img, gray))
        except ExtractionError as exc:
            raise ExtractionError(f"{group.value}: {exc}") from exc
    return FeatureVector(tuple(segments))


def write_feature_cache(path: str | Path, entries: dict[str, FeatureVector]) -> None:
    """Write a JSON-lines feature cache, one object per image, sorted by id.

    Floats are serialized with their shortest round-trip decimal form, so a
    reloaded cache reproduces the original float64 values exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for image_id in sorted(entries):
            vec = entries[image_id]
            obj = {
                "id": image_id,
                "groups": {s.group.value: s.values.tolist() for s in vec.segments},
            }
            fh.write(json.dumps(obj) + "\n")


def read_feature_cache(path: str | Path) -> dict[str, dict[str, np.ndarray]]:
    """Load a JSON-lines feature cache into id -> group name -> values."""
    cache: dict[str, dict[str, np.ndarray]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                image_id = obj["id"]
                groups = obj["groups"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: invalid cache line ({exc})") from exc
            cache[image_id] = {
                name: np.asarray(vals, dtype=np.float64) for name, vals in groups.items()
            }
    return cache
