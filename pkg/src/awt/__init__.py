"""Augment, weight, then transport: zero-shot classification over view sets.

Given augmented image-view embeddings and per-class description embeddings
in a joint space, the pipeline weights every view by its prediction
entropy, solves one entropy-regularized transport problem per (image,
class) pair under the cosine cost, and classifies by a softmax over the
negative transport distances.
"""

from .core import (
    CostMatrix,
    DiscreteMeasure,
    EmbeddingMatrix,
    OtResult,
    TransportPlan,
    cosine_cost,
    mean_embedding,
    mean_embedding_matrix,
    normalize_rows,
)
from .manifest import TaskManifest, load_manifest, validate_manifest
from .npyio import read_array, read_header, write_array
from .pipeline import (
    AwtConfig,
    ClassificationResult,
    EvaluationReport,
    ablation_sweep,
    classify_image,
    evaluate,
)
from .prompting import (
    DatasetSpec,
    DescriptionSet,
    FixtureClient,
    HttpChatClient,
    QuestionSet,
    generate_descriptions,
    generate_questions,
    parse_questions,
    render_step1_prompt,
)
from .transport import SinkhornConfig, awt_distance, classify_ot, exact_ot, sinkhorn
from .weighting import (
    ClassProbabilities,
    ViewWeights,
    classify_cosine,
    entropy,
    weight_class_descriptions,
    weight_image_views,
)

__version__ = "0.1.0"

__all__ = [
    "AwtConfig",
    "ClassProbabilities",
    "ClassificationResult",
    "CostMatrix",
    "DatasetSpec",
    "DescriptionSet",
    "DiscreteMeasure",
    "EmbeddingMatrix",
    "EvaluationReport",
    "FixtureClient",
    "HttpChatClient",
    "OtResult",
    "QuestionSet",
    "SinkhornConfig",
    "TaskManifest",
    "TransportPlan",
    "ViewWeights",
    "ablation_sweep",
    "awt_distance",
    "classify_cosine",
    "classify_image",
    "classify_ot",
    "cosine_cost",
    "entropy",
    "evaluate",
    "exact_ot",
    "generate_descriptions",
    "generate_questions",
    "load_manifest",
    "mean_embedding",
    "mean_embedding_matrix",
    "normalize_rows",
    "parse_questions",
    "read_array",
    "read_header",
    "render_step1_prompt",
    "sinkhorn",
    "validate_manifest",
    "weight_class_descriptions",
    "weight_image_views",
]
