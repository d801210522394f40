"""Future-frame prediction anomaly detection at desk scale.

Train a U-Net to predict the next video frame from the previous t frames
under intensity, gradient, optical-flow and least-squares adversarial
constraints on normal-only footage; score test frames by prediction PSNR and
evaluate with frame-level ROC/AUC.
"""

from .errors import FfadError
from .frames_io import (
    Clip,
    FrameSequence,
    IngestConfig,
    LabelSeries,
    RawFrame,
    load_labels,
    load_split,
    load_video_frames,
    sample_clip,
)
from .flow import FlowEstimatorSpec, HornSchunckFlow, estimate_flow, warp, warp_frame
from .losses import (
    LossBreakdown,
    LossWeights,
    adversarial_loss_d,
    adversarial_loss_g,
    discriminator_objective,
    flow_loss,
    generator_objective,
    gradient_loss,
    intensity_loss,
)
from .predictor import (
    DiscriminatorConfig,
    GeneratorConfig,
    PatchDiscriminator,
    UNetGenerator,
    count_parameters,
    discriminate,
    patch_grid_size,
    predict_next,
)
from .scorer import ScoreSeries, normalize_scores, psnr, score_video
from .evaluator import (
    AblationVariant,
    EvalReport,
    default_ablation_grid,
    evaluate,
    frame_auc,
    roc_curve,
    run_ablation,
    score_gap,
)
from .toyworld import (
    AgentSpec,
    ToyScenario,
    default_test_scenario,
    default_training_scenario,
    generate_test_set,
    generate_training_set,
    render_scene,
)
from .trainer import TrainConfig, TrainState, init_state, train, train_step

__version__ = "0.1.0"
