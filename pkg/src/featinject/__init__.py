"""Traditional-feature injection for land-cover classification.

Classical texture/color extractors, a frozen-CNN embedding interchange
format (EMB1), a trainable fusion head, and an experiment harness for
baseline-vs-injected accuracy comparisons.
"""

from .embed import (
    BACKBONES,
    BackboneSpec,
    EmbeddingRecord,
    EmbeddingStore,
    check_backbone,
    read_embeddings,
    read_embeddings_file,
    synthetic_backbone,
    write_embeddings,
    write_embeddings_file,
)
from .featx import (
    FeatureGroup,
    FeatureSelection,
    FeatureSegment,
    FeatureVector,
    GLCM,
    color_invariant_features,
    extract_all,
    glcm_matrix,
    haralick_features,
    hog_features,
    hu_moments,
    lbp_features,
    mean_features,
)
from .imgio import (
    DatasetManifest,
    ImageGray,
    ImageRGB,
    SplitManifest,
    decode_image,
    load_image,
    scan_dataset,
    split_dataset,
    to_gray,
)
from .nn import (
    AdamState,
    BatchNormParams,
    DenseParams,
    FusionHeadParams,
    adam_step,
    batchnorm_apply,
    dense_forward,
    grad_check,
    head_backward,
    head_forward,
    init_fusion_head,
    softmax_xent,
)
from .pipeline import (
    ComparisonReport,
    FusedDataset,
    Metrics,
    ScenarioSpec,
    TrainConfig,
    build_fused_dataset,
    compare_scenarios,
    evaluate,
    load_model,
    save_model,
    train_head,
)

__version__ = "0.1.0"
