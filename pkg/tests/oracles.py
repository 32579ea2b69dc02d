"""Independent brute-force reference implementations.

Naive per-pixel loops written directly from the feature definitions, kept
deliberately separate from the vectorized production code.  Shared
definition details (bin layout over [-pi, pi), exact handling of the eight
axis/diagonal directions, atan2(0,0) := 0) are re-derived here from
scratch rather than imported.
"""

import math

import numpy as np

N_BINS = 64


def gray_oracle(rgb: np.ndarray) -> np.ndarray:
    h, w, _ = rgb.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for yy in range(h):
        for xx in range(w):
            r, g, b = (float(rgb[yy, xx, c]) for c in range(3))
            val = 0.299 * r + 0.587 * g + 0.114 * b
            out[yy, xx] = min(255, max(0, int(math.floor(val + 0.5))))
    return out


def mean_oracle(rgb: np.ndarray) -> list[float]:
    h, w, _ = rgb.shape
    sums = [0.0, 0.0, 0.0]
    for yy in range(h):
        for xx in range(w):
            for c in range(3):
                sums[c] += float(rgb[yy, xx, c])
    return [s / (255.0 * w * h) for s in sums]


def glcm_oracle(gray: np.ndarray, levels: int, offset: tuple[int, int]) -> np.ndarray:
    dy, dx = offset
    h, w = gray.shape
    counts = np.zeros((levels, levels), dtype=np.float64)
    for yy in range(h):
        for xx in range(w):
            y2, x2 = yy + dy, xx + dx
            if 0 <= y2 < h and 0 <= x2 < w:
                a = int(gray[yy, xx]) * levels // 256
                b = int(gray[y2, x2]) * levels // 256
                counts[a, b] += 1.0
                counts[b, a] += 1.0
    return counts / counts.sum()


def haralick_oracle(p: np.ndarray) -> list[float]:
    n = p.shape[0]
    contrast = homogeneity = asm = 0.0
    marginal = [sum(p[i, j] for j in range(n)) for i in range(n)]
    mu = sum(i * marginal[i] for i in range(n))
    var = sum((i - mu) ** 2 * marginal[i] for i in range(n))
    cov = 0.0
    for i in range(n):
        for j in range(n):
            contrast += p[i, j] * (i - j) ** 2
            homogeneity += p[i, j] / (1.0 + (i - j) ** 2)
            asm += p[i, j] ** 2
            cov += p[i, j] * (i - mu) * (j - mu)
    correlation = 1.0 if var == 0.0 else cov / var
    return [contrast, correlation, homogeneity, math.sqrt(asm), asm]


def hu_oracle(gray: np.ndarray) -> list[float]:
    h, w = gray.shape
    m00 = m10 = m01 = 0.0
    for yy in range(h):
        for xx in range(w):
            v = float(gray[yy, xx])
            m00 += v
            m10 += xx * v
            m01 += yy * v
    if m00 == 0.0:
        return [0.0] * 7
    xbar, ybar = m10 / m00, m01 / m00

    def mu(p: int, q: int) -> float:
        total = 0.0
        for yy in range(h):
            for xx in range(w):
                total += ((xx - xbar) ** p) * ((yy - ybar) ** q) * float(gray[yy, xx])
        return total

    def eta(p: int, q: int) -> float:
        return mu(p, q) / m00 ** (1.0 + (p + q) / 2.0)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    hs = [
        n20 + n02,
        (n20 - n02) ** 2 + 4 * n11**2,
        (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2,
        (n30 + n12) ** 2 + (n21 + n03) ** 2,
        (n30 - 3 * n12) * (n30 + n12) * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
        + (3 * n21 - n03) * (n21 + n03) * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2),
        (n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2)
        + 4 * n11 * (n30 + n12) * (n21 + n03),
        (3 * n21 - n03) * (n30 + n12) * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
        - (n30 - 3 * n12) * (n21 + n03) * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2),
    ]
    return [0.0 if v == 0.0 else -math.copysign(1.0, v) * math.log10(abs(v)) for v in hs]


def lbp_oracle(gray: np.ndarray) -> list[float]:
    h, w = gray.shape
    neighbors = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    hist = [0.0] * N_BINS
    count = 0
    for yy in range(1, h - 1):
        for xx in range(1, w - 1):
            code = 0
            for dy, dx in neighbors:
                code = (code << 1) | (1 if gray[yy + dy, xx + dx] >= gray[yy, xx] else 0)
            hist[code // 4] += 1.0
            count += 1
    return [v / count for v in hist]


def direction_bin(gy: float, gx: float) -> int:
    """Bin index of atan2(gy, gx) in 64 bins over [-pi, pi).

    The eight directions whose angle is a multiple of pi/4 fall exactly on
    bin boundaries; resolve them by case analysis (+pi wraps to -pi).
    """
    if gy == 0.0 and gx == 0.0:
        return 32  # atan2(0, 0) := 0
    if gy == 0.0:
        return 32 if gx > 0 else 0
    if gx == 0.0:
        return 48 if gy > 0 else 16
    if abs(gx) == abs(gy):
        if gx > 0:
            return 40 if gy > 0 else 24
        return 56 if gy > 0 else 8
    theta = math.atan2(gy, gx)
    return int(math.floor((theta + math.pi) / (2.0 * math.pi) * N_BINS)) % N_BINS


def hog_oracle(gray: np.ndarray) -> list[float]:
    h, w = gray.shape
    hist = [0.0] * N_BINS
    total = 0.0
    for yy in range(1, h - 1):
        for xx in range(1, w - 1):
            gx = (float(gray[yy, xx + 1]) - float(gray[yy, xx - 1])) / 2.0
            gy = (float(gray[yy + 1, xx]) - float(gray[yy - 1, xx])) / 2.0
            mag = math.hypot(gx, gy)
            if mag == 0.0:
                continue
            hist[direction_bin(gy, gx)] += mag
            total += mag
    if total == 0.0:
        return hist
    norm = sum(hist)
    return [v / norm for v in hist]


def colorinv_oracle(rgb: np.ndarray) -> list[float]:
    h, w, _ = rgb.shape
    hist = [0.0] * N_BINS
    for yy in range(h):
        for xx in range(w):
            r, g, b = (float(rgb[yy, xx, c]) for c in range(3))
            e_lambda = 0.30 * r + 0.04 * g - 0.35 * b
            e_ll = 0.34 * r - 0.60 * g + 0.17 * b
            hist[direction_bin(e_lambda, e_ll)] += 1.0
    return [v / (w * h) for v in hist]
