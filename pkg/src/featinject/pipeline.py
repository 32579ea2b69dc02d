"""Experiment harness.

Joins a dataset split with traditional features and frozen-CNN embeddings,
trains the fusion head under the fixed protocol (16 epochs, batch 64,
Adam, five repeats), evaluates, and assembles scenario comparison reports
mirroring the published table layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .embed import EmbeddingStore
from .errors import ConfigError, ContractError, DecodeError, JoinError
from .featx import FeatureSelection, extract_all
from .imgio import DatasetManifest, SplitManifest, load_image
from .nn import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    ADAM_LR,
    N_CLASSES,
    AdamState,
    FusionHeadParams,
    BatchNormParams,
    DenseParams,
    adam_step,
    head_backward,
    head_forward,
    head_param_dict,
    init_fusion_head,
    set_head_params,
    softmax_xent,
)

MODEL_FORMAT = "finj-model-v1"

EVAL_CHUNK = 1024


@dataclass(frozen=True)
class TrainConfig:
    """Training protocol knobs; defaults follow the published protocol."""

    epochs: int = 16
    batch_size: int = 64
    lr: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    seed: int = 0
    repeats: int = 5
    hidden_units: int = 32

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "repeats": self.repeats,
            "hidden_units": self.hidden_units,
        }


@dataclass(frozen=True)
class ScenarioSpec:
    """One comparison row: a feature subset injected into one backbone."""

    name: str
    selection: FeatureSelection
    backbone: str


@dataclass
class FusedBlock:
    """Row-aligned matrices for one split partition."""

    cnn: np.ndarray  # n x cnn_dim
    trad: np.ndarray  # n x trad_dim
    labels: np.ndarray  # n

    def __post_init__(self):
        if not (self.cnn.shape[0] == self.trad.shape[0] == self.labels.shape[0]):
            raise ContractError("fused block row counts disagree")


@dataclass
class FusedDataset:
    train: FusedBlock
    test: FusedBlock


@dataclass
class Metrics:
    """Evaluation result; loss_history is filled by the training run."""

    accuracy: float
    per_class_accuracy: list[float]
    confusion: np.ndarray  # N_CLASSES x N_CLASSES counts, rows = true class
    loss_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": self.confusion.tolist(),
            "loss_history": self.loss_history,
        }


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    metrics: list[Metrics]
    mean_accuracy: float
    max_accuracy: float
    delta_mean: float
    delta_max: float
    model_file_bytes: int

    @property
    def accuracies(self) -> list[float]:
        return [m.accuracy for m in self.metrics]


@dataclass
class ComparisonReport:
    baseline: str
    results: list[ScenarioResult]
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "baseline": self.baseline,
            "scenarios": [
                {
                    "scenario": r.spec.name,
                    "backbone": r.spec.backbone,
                    "features": r.spec.selection.names(),
                    "repeats": len(r.metrics),
                    "accuracies": r.accuracies,
                    "mean_accuracy": r.mean_accuracy,
                    "max_accuracy": r.max_accuracy,
                    "delta_mean_vs_baseline": r.delta_mean,
                    "model_file_bytes": r.model_file_bytes,
                }
                for r in self.results
            ],
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_json_dict(), indent=2) + "\n").encode("utf-8")

    def render_table(self) -> str:
        """Aligned text table mirroring the published comparison layout."""
        header = ("Test Scenario", "Mean Accuracy", "Maximum Accuracy", "Delta vs Baseline")
        rows = [
            (
                r.spec.name,
                f"{r.mean_accuracy:.4f}",
                f"{r.max_accuracy:.4f}",
                f"{r.delta_mean:+.4f}",
            )
            for r in self.results
        ]
        widths = [
            max(len(header[c]), *(len(row[c]) for row in rows)) for c in range(len(header))
        ]
        lines = [
            "  ".join(h.ljust(widths[c]) for c, h in enumerate(header)),
            "  ".join("-" * w for w in widths),
        ]
        for row in rows:
            lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)))
        return "\n".join(lines) + "\n"


def _trad_rows(
    ids: list[str],
    manifest: DatasetManifest,
    sel: FeatureSelection,
    cache: dict[str, dict[str, np.ndarray]] | None,
) -> np.ndarray:
    if not sel.included:
        return np.zeros((len(ids), 0))
    groups = sel.ordered()
    rows = np.empty((len(ids), sel.width))
    for i, image_id in enumerate(ids):
        if cache is not None:
            entry = cache.get(image_id)
            if entry is None:
                raise JoinError(f"feature cache is missing id {image_id!r}")
            parts = []
            for g in groups:
                if g.value not in entry:
                    raise JoinError(
                        f"feature cache entry {image_id!r} lacks group {g.value!r}"
                    )
                parts.append(entry[g.value])
            rows[i] = np.concatenate(parts)
        else:
            try:
                img = load_image(manifest.root / image_id)
            except DecodeError as exc:
                raise JoinError(f"cannot load image {image_id!r}: {exc}") from exc
            rows[i] = extract_all(img, sel).flat
    return rows


def build_fused_dataset(
    split: SplitManifest,
    manifest: DatasetManifest,
    store: EmbeddingStore,
    sel: FeatureSelection,
    cache: dict[str, dict[str, np.ndarray]] | None = None,
) -> FusedDataset:
    """Assemble train/test matrices in split-manifest row order.

    The cnn block comes from the embedding store, the traditional block
    from ``extract_all`` (or the feature cache when provided), labels from
    the dataset manifest.  Missing ids raise a join error listing them.
    """
    labels_by_id = manifest.labels()
    all_ids = split.train_ids + split.test_ids
    missing_emb = [i for i in all_ids if i not in store.records]
    if missing_emb:
        raise JoinError(
            f"embedding store {store.backbone!r} is missing {len(missing_emb)} id(s): "
            + ", ".join(missing_emb[:10])
            + ("..." if len(missing_emb) > 10 else "")
        )
    missing_img = [i for i in all_ids if i not in labels_by_id]
    if missing_img:
        raise JoinError(
            f"dataset manifest is missing {len(missing_img)} id(s): "
            + ", ".join(missing_img[:10])
            + ("..." if len(missing_img) > 10 else "")
        )

    def block(ids: list[str]) -> FusedBlock:
        cnn = np.stack([store.records[i].vector for i in ids]).astype(np.float64) \
            if ids else np.zeros((0, store.dim))
        trad = _trad_rows(ids, manifest, sel, cache)
        labels = np.array([labels_by_id[i] for i in ids], dtype=np.int64)
        return FusedBlock(cnn=cnn, trad=trad, labels=labels)

    return FusedDataset(train=block(split.train_ids), test=block(split.test_ids))


def train_head(block: FusedBlock, cfg: TrainConfig) -> tuple[FusionHeadParams, list[float]]:
    """Train the fusion head; fully deterministic given (data, cfg).

    Rows are reshuffled every epoch with a Philox generator seeded by
    ``cfg.seed`` (which also drives weight initialization); the final
    partial batch is kept.  Returns the head and per-epoch mean losses.
    """
    n = block.labels.shape[0]
    if n < cfg.batch_size:
        raise ConfigError(
            f"need at least one full batch ({cfg.batch_size} rows), got {n}"
        )
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    head = init_fusion_head(block.cnn.shape[1], block.trad.shape[1], cfg.hidden_units, rng)
    params = head_param_dict(head)
    state = AdamState.init(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)

    history: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            logits, cache = head_forward(head, block.cnn[idx], block.trad[idx], "train")
            loss, d_logits = softmax_xent(logits, block.labels[idx])
            grads = head_backward(cache, d_logits)
            params, state = adam_step(
                state, params, {k: grads[k] for k in params}
            )
            set_head_params(head, params)
            total += loss * idx.size
        history.append(total / n)
    return head, history


def evaluate(head: FusionHeadParams, block: FusedBlock) -> Metrics:
    """Infer-mode evaluation; argmax ties resolve to the lowest class index."""
    n = block.labels.shape[0]
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    correct = 0
    for start in range(0, n, EVAL_CHUNK):
        sl = slice(start, start + EVAL_CHUNK)
        logits, _ = head_forward(head, block.cnn[sl], block.trad[sl], "infer")
        preds = np.argmax(logits, axis=1)
        truth = block.labels[sl]
        correct += int((preds == truth).sum())
        np.add.at(confusion, (truth, preds), 1)
    row_totals = confusion.sum(axis=1)
    per_class = [
        float(confusion[c, c] / row_totals[c]) if row_totals[c] else 0.0
        for c in range(N_CLASSES)
    ]
    accuracy = correct / n if n else 0.0
    return Metrics(accuracy=float(accuracy), per_class_accuracy=per_class, confusion=confusion)


def run_scenario(
    fused: FusedDataset, cfg: TrainConfig
) -> tuple[list[Metrics], list[FusionHeadParams]]:
    """Run ``cfg.repeats`` independent trainings with seeds seed+0..seed+r-1.

    The split is fixed across repeats; only initialization and shuffling
    vary, keeping the comparison paired.
    """
    metrics: list[Metrics] = []
    heads: list[FusionHeadParams] = []
    for k in range(cfg.repeats):
        run_cfg = replace(cfg, seed=cfg.seed + k)
        head, history = train_head(fused.train, run_cfg)
        m = evaluate(head, fused.test)
        m.loss_history = history
        metrics.append(m)
        heads.append(head)
    return metrics, heads


def compare_scenarios(
    scenarios: list[ScenarioSpec],
    manifest: DatasetManifest,
    split: SplitManifest,
    stores: dict[str, EmbeddingStore],
    cfg: TrainConfig,
    cache: dict[str, dict[str, np.ndarray]] | None = None,
) -> ComparisonReport:
    """Train and evaluate every scenario and report deltas vs the baseline.

    The baseline is the first scenario with an empty feature selection.
    Traditional features are extracted once for the union of all selections
    and shared across scenarios, which is semantically invisible.
    """
    if not scenarios:
        raise ConfigError("no scenarios given")
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError("scenario names must be unique")
    baseline_spec = next((s for s in scenarios if not s.selection.included), None)
    if baseline_spec is None:
        raise ConfigError("no baseline scenario (empty feature selection) present")
    for spec in scenarios:
        if spec.backbone not in stores:
            raise ConfigError(f"scenario {spec.name!r}: no store for backbone {spec.backbone!r}")

    union = frozenset().union(*(s.selection.included for s in scenarios))
    if union and cache is None:
        union_sel = FeatureSelection(frozenset(union))
        cache = {}
        for image_id in split.train_ids + split.test_ids:
            try:
                img = load_image(manifest.root / image_id)
            except DecodeError as exc:
                raise JoinError(f"cannot load image {image_id!r}: {exc}") from exc
            vec = extract_all(img, union_sel)
            cache[image_id] = {s.group.value: s.values for s in vec.segments}

    results: list[ScenarioResult] = []
    for spec in scenarios:
        fused = build_fused_dataset(split, manifest, stores[spec.backbone], spec.selection, cache)
        metrics, heads = run_scenario(fused, cfg)
        accuracies = [m.accuracy for m in metrics]
        best = int(np.argmax(accuracies))
        model_bytes = model_to_bytes(
            heads[best],
            spec.selection,
            spec.backbone,
            {"train": cfg.to_dict(), "split": {"seed": split.seed, "ratio": split.train_ratio}},
        )
        results.append(
            ScenarioResult(
                spec=spec,
                metrics=metrics,
                mean_accuracy=float(np.mean(accuracies)),
                max_accuracy=float(np.max(accuracies)),
                delta_mean=0.0,
                delta_max=0.0,
                model_file_bytes=len(model_bytes),
            )
        )

    baseline = next(r for r in results if r.spec.name == baseline_spec.name)
    for r in results:
        r.delta_mean = r.mean_accuracy - baseline.mean_accuracy
        r.delta_max = r.max_accuracy - baseline.max_accuracy
    return ComparisonReport(baseline=baseline_spec.name, results=results, config=cfg.to_dict())


def model_to_bytes(
    head: FusionHeadParams,
    selection: FeatureSelection,
    backbone: str,
    config: dict,
) -> bytes:
    """Serialize a trained head as compact, self-describing JSON.

    Floats use the shortest round-trip decimal form, so loading reproduces
    the exact float64 parameters.
    """
    obj = {
        "format": MODEL_FORMAT,
        "backbone": backbone,
        "features": selection.names(),
        "dims": {
            "cnn": head.cnn_dim,
            "trad": head.trad_dim,
            "hidden": head.hidden.out_dim,
            "classes": head.output.out_dim,
        },
        "param_count": head.param_count(),
        "config": config,
        "batchnorm": {
            "gamma": head.cnn_bn.gamma.tolist(),
            "beta": head.cnn_bn.beta.tolist(),
            "running_mean": head.cnn_bn.running_mean.tolist(),
            "running_var": head.cnn_bn.running_var.tolist(),
            "momentum": head.cnn_bn.momentum,
            "epsilon": head.cnn_bn.epsilon,
        },
        "hidden": {
            "weights": head.hidden.weights.tolist(),
            "bias": head.hidden.bias.tolist(),
        },
        "output": {
            "weights": head.output.weights.tolist(),
            "bias": head.output.bias.tolist(),
        },
    }
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def model_from_bytes(data: bytes) -> tuple[FusionHeadParams, FeatureSelection, str, dict]:
    obj = json.loads(data.decode("utf-8"))
    if obj.get("format") != MODEL_FORMAT:
        raise ConfigError(f"not a {MODEL_FORMAT} file")
    dims = obj["dims"]
    bn = obj["batchnorm"]
    head = FusionHeadParams(
        cnn_bn=BatchNormParams(
            dim=dims["cnn"],
            gamma=np.array(bn["gamma"], dtype=np.float64),
            beta=np.array(bn["beta"], dtype=np.float64),
            running_mean=np.array(bn["running_mean"], dtype=np.float64),
            running_var=np.array(bn["running_var"], dtype=np.float64),
            momentum=bn["momentum"],
            epsilon=bn["epsilon"],
        ),
        hidden=DenseParams(
            in_dim=dims["cnn"] + dims["trad"],
            out_dim=dims["hidden"],
            weights=np.array(obj["hidden"]["weights"], dtype=np.float64),
            bias=np.array(obj["hidden"]["bias"], dtype=np.float64),
        ),
        output=DenseParams(
            in_dim=dims["hidden"],
            out_dim=dims["classes"],
            weights=np.array(obj["output"]["weights"], dtype=np.float64),
            bias=np.array(obj["output"]["bias"], dtype=np.float64),
        ),
    )
    selection = FeatureSelection.parse(",".join(obj["features"]) if obj["features"] else "none")
    return head, selection, obj["backbone"], obj["config"]


def save_model(
    path: str | Path,
    head: FusionHeadParams,
    selection: FeatureSelection,
    backbone: str,
    config: dict,
) -> int:
    data = model_to_bytes(head, selection, backbone, config)
    Path(path).write_bytes(data)
    return len(data)


def load_model(path: str | Path) -> tuple[FusionHeadParams, FeatureSelection, str, dict]:
    return model_from_bytes(Path(path).read_bytes())
