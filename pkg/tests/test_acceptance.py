"""Acceptance suite.

One test per acceptance criterion, each at its stated tolerance, printing
a PASS line on success (run with ``pytest -s`` to see them).  The desk-
scale injection run uses the bundled textured-image generator plus the
synthetic backbone, exercised end to end through the ``compare`` command.
"""

import json
import math
import time

import numpy as np
import pytest

import oracles
from featinject.cli import dispatch
from featinject.featx import (
    color_invariant_features,
    glcm_matrix,
    haralick_features,
    hog_features,
    hu_moments,
    lbp_features,
    mean_features,
)
from featinject.fixture import build_synthetic_store, generate_fixture
from featinject.imgio import ImageGray, ImageRGB, to_gray
from featinject.nn import (
    AdamState,
    BatchNormParams,
    adam_step,
    batchnorm_apply,
    grad_check,
    head_backward,
    head_forward,
    head_param_dict,
    init_fusion_head,
    softmax_xent,
)

EMBED_DIM = 512
PER_CLASS = 100
SIZE_BOUND_BYTES = 200 * 1024


@pytest.fixture(scope="module")
def fixture_run(tmp_path_factory):
    """Generate the 1000-image fixture and run `compare` twice end to end."""
    base = tmp_path_factory.mktemp("acceptance")
    data = base / "dataset"
    started = time.monotonic()
    manifest = generate_fixture(data, per_class=PER_CLASS, size=64, seed=7)
    store = build_synthetic_store(manifest, dim=EMBED_DIM, seed=1234)
    from featinject.embed import write_embeddings_file

    emb = base / "synthetic.emb1"
    write_embeddings_file(store, emb)

    scenarios = base / "scenarios.json"
    scenarios.write_text(
        json.dumps(
            [
                {"name": "baseline", "features": "none", "embeddings": str(emb)},
                {"name": "all features", "features": "all", "embeddings": str(emb)},
            ]
        )
    )
    reports = []
    for name in ("report_a.json", "report_b.json"):
        out = base / name
        code = dispatch(
            [
                "compare",
                "--data", str(data),
                "--scenarios", str(scenarios),
                "--seed", "0",
                "--repeats", "5",
                "--out", str(out),
            ]
        )
        assert code == 0, f"compare exited {code}"
        reports.append(out.read_bytes())
    elapsed = time.monotonic() - started
    return reports, elapsed


def test_extractor_oracle_equivalence():
    """100 random 16x16 images: every extractor within 1e-9 of brute force, < 30 s."""
    rng = np.random.default_rng(2024)
    started = time.monotonic()
    worst = 0.0
    for _ in range(100):
        rgb = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        img = ImageRGB(rgb)
        gray = to_gray(img)
        assert np.array_equal(gray.pixels, oracles.gray_oracle(rgb))
        pairs = [
            (mean_features(img).values, oracles.mean_oracle(rgb)),
            (glcm_matrix(gray).matrix.ravel(),
             np.asarray(oracles.glcm_oracle(gray.pixels, 64, (0, 1))).ravel()),
            (haralick_features(glcm_matrix(gray)).values,
             oracles.haralick_oracle(glcm_matrix(gray).matrix)),
            (hu_moments(gray).values, oracles.hu_oracle(gray.pixels)),
            (lbp_features(gray).values, oracles.lbp_oracle(gray.pixels)),
            (hog_features(gray).values, oracles.hog_oracle(gray.pixels)),
            (color_invariant_features(img).values, oracles.colorinv_oracle(rgb)),
        ]
        for got, ref in pairs:
            worst = max(worst, float(np.abs(np.asarray(got) - np.asarray(ref)).max()))
    elapsed = time.monotonic() - started
    assert worst <= 1e-9, f"extractor/oracle divergence {worst:.3e}"
    assert elapsed < 30.0, f"oracle comparison took {elapsed:.1f}s"
    print(f"\nPASS: extractor oracle equivalence (max dev {worst:.2e}, {elapsed:.1f}s)")


def test_invariance_suite():
    """Rotation/reflection/remap/scaling invariances and GLCM identities."""
    rng = np.random.default_rng(77)
    for _ in range(20):
        img = ImageRGB(rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
        gray = to_gray(img)

        # Hu: equal under 90/180/270 rotation; h7 flips sign under reflection
        hu = hu_moments(gray).values
        for k in (1, 2, 3):
            rotated = hu_moments(ImageGray(np.rot90(gray.pixels, k).copy())).values
            assert np.abs(rotated - hu).max() <= 1e-9
        mirrored = hu_moments(ImageGray(gray.pixels[:, ::-1].copy())).values
        assert np.abs(mirrored[:6] - hu[:6]).max() <= 1e-9
        assert abs(mirrored[6] + hu[6]) <= 1e-9

        # LBP: exactly invariant under a remap that is strictly increasing
        # on the values occurring in the image
        values = np.unique(gray.pixels)
        targets = np.sort(rng.choice(256, size=values.size, replace=False))
        lut = np.zeros(256, dtype=np.uint8)
        lut[values] = targets.astype(np.uint8)
        remapped = ImageGray(lut[gray.pixels])
        assert np.array_equal(lbp_features(gray).values, lbp_features(remapped).values)

        # HOG: 90-degree rotation shifts the histogram by 16 bins (mod 64)
        hog = hog_features(gray).values
        rotated = hog_features(ImageGray(np.rot90(gray.pixels).copy())).values
        assert np.abs(rotated - np.roll(hog, -16)).max() <= 1e-9

        # Color invariants: exact under positive channel scaling
        even = ImageRGB(((img.pixels.astype(np.int64) // 2) * 2).astype(np.uint8))
        halved = ImageRGB((even.pixels // 2).astype(np.uint8))
        assert np.array_equal(
            color_invariant_features(even).values,
            color_invariant_features(halved).values,
        )

        # GLCM identities
        glcm = glcm_matrix(gray)
        assert abs(glcm.matrix.sum() - 1.0) <= 1e-9
        assert np.array_equal(glcm.matrix, glcm.matrix.T)
        _, corr, _, energy, asm = haralick_features(glcm).values
        assert abs(energy**2 - asm) <= 1e-12
        assert abs(corr) <= 1.0 + 1e-9
    print("\nPASS: invariance suite (Hu/LBP/HOG/color/GLCM)")


def test_gradient_correctness():
    """100 random small heads: analytic vs central differences < 1e-5."""
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        cnn_dim = int(rng.integers(2, 9))
        trad_dim = int(rng.integers(0, 9))
        hidden_units = int(rng.integers(2, 9))
        head = init_fusion_head(cnn_dim, trad_dim, hidden_units, rng)
        cnn = rng.normal(size=(4, cnn_dim))
        trad = rng.normal(size=(4, trad_dim))
        labels = rng.integers(0, 10, size=4)
        logits, cache = head_forward(head, cnn, trad, "train")
        _, d_logits = softmax_xent(logits, labels)
        grads = head_backward(cache, d_logits)
        params = head_param_dict(head)
        for key, value in params.items():
            def f(x, key=key):
                saved = params[key].copy()
                params[key][...] = x
                logits2, _ = head_forward(head, cnn, trad, "train")
                loss, _ = softmax_xent(logits2, labels)
                params[key][...] = saved
                return loss

            worst = max(worst, grad_check(f, grads[key], value.copy(), 1e-4))
    assert worst < 1e-5, f"max relative gradient error {worst:.3e}"
    print(f"\nPASS: gradient correctness (max rel err {worst:.2e} over 100 heads)")


def test_closed_form_checks():
    """Uniform-logit loss, first Adam step, batchnorm train-mode statistics."""
    loss, _ = softmax_xent(np.zeros((8, 10)), np.arange(8) % 10)
    assert abs(loss - math.log(10.0)) <= 1e-12

    # first Adam step with unit gradient and fresh state: bias correction
    # makes the magnitude exactly lr (epsilon 0 isolates the identity);
    # the default epsilon gives the closed form lr / (1 + eps)
    params = {"w": np.array([0.0])}
    state = AdamState.init(params, lr=0.001, epsilon=0.0)
    updated, _ = adam_step(state, params, {"w": np.array([1.0])})
    assert abs(abs(updated["w"][0]) - 0.001) / 0.001 <= 1e-9
    state = AdamState.init(params, lr=0.001)
    updated, _ = adam_step(state, params, {"w": np.array([1.0])})
    assert abs(updated["w"][0] + 0.001 / (1.0 + 1e-7)) <= 1e-18

    rng = np.random.default_rng(5)
    bn = BatchNormParams.identity(7)
    batch = rng.normal(loc=-4.0, scale=3.0, size=(128, 7))
    out, _ = batchnorm_apply(bn, batch, "train")
    assert np.abs(out.mean(axis=0)).max() <= 1e-9
    assert np.abs(out.var(axis=0) - 1.0).max() <= 1e-6
    print("\nPASS: closed-form checks (ln 10, Adam first step, batchnorm stats)")


def test_fixture_injection_effect(fixture_run):
    """All-features vs baseline on the bundled fixture: >= 2 points, < 5 min."""
    reports, elapsed = fixture_run
    obj = json.loads(reports[0])
    rows = {row["scenario"]: row for row in obj["scenarios"]}
    baseline = rows["baseline"]["mean_accuracy"]
    injected = rows["all features"]["mean_accuracy"]
    delta = injected - baseline
    assert delta >= 0.02, (
        f"mean accuracy improvement {delta:+.4f} below 2 points "
        f"(baseline {baseline:.4f}, all features {injected:.4f})"
    )
    assert elapsed < 300.0, f"fixture run took {elapsed:.0f}s"
    print(
        f"\nPASS: fixture injection effect (baseline {baseline:.4f} -> "
        f"{injected:.4f}, delta {delta:+.4f}, {elapsed:.0f}s)"
    )


def test_injection_size_overhead(fixture_run):
    """All-features model file exceeds the baseline file by < 200 KB."""
    reports, _ = fixture_run
    obj = json.loads(reports[0])
    rows = {row["scenario"]: row for row in obj["scenarios"]}
    delta = rows["all features"]["model_file_bytes"] - rows["baseline"]["model_file_bytes"]
    assert 0 < delta < SIZE_BOUND_BYTES, f"model size delta {delta} bytes"
    print(f"\nPASS: injection size overhead ({delta} bytes < {SIZE_BOUND_BYTES})")


def test_compare_determinism(fixture_run):
    """Two identical `compare` invocations produce byte-identical reports."""
    reports, _ = fixture_run
    assert reports[0] == reports[1]
    print(f"\nPASS: compare determinism ({len(reports[0])} identical bytes)")
