"""fillerspot: ASR-free filler-word event detection.

A spectrogram goes through a small residual network with per-frame heads
for a category heatmap, word length, and sub-frame offset; peaks decode
into timestamped events. Training pairs a penalty-reduced focal loss with
inter-category terms that specifically punish filler/non-filler confusion,
and a mining loop that promotes the most confusing words into their own
auxiliary categories mid-run.
"""

from .config import (
    AugmentConfig,
    Config,
    ConfigError,
    DecodeConfig,
    FrontendConfig,
    LossFactors,
    MiningSchedule,
    ModelConfig,
    SynthConfig,
    TrainConfig,
    desk_config,
    load_config,
    paper_config,
    save_config,
)
from .corpus import (
    FILLER,
    NON_FILLER,
    AnnotatedClip,
    CorpusError,
    SynthSpec,
    WordEvent,
    WordTemplate,
    desk_synth_spec,
    generate_synth,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .decode import DetectionEvent, decode, save_detections
from .evalmetrics import (
    EventScore,
    corpus_event_prf,
    event_prf,
    match_events,
    oracle_match,
    score_report_text,
)
from .features import Spectrogram, augment, stft_features
from .mining import FpReport, fp_report, mining_step, select_hard_category
from .net import FillerNet, Prediction, build_model, predict, receptive_field_frames
from .objective import (
    LossBreakdown,
    ObjectiveError,
    focal_main,
    inter_category_focal,
    regression_losses,
    total_loss,
)
from .targets import CategoryRegistry, EncodingError, RegistryError, TargetTensor, encode_targets
from .trainer import (
    Checkpoint,
    CheckpointError,
    EvalResult,
    TrainingError,
    TrainResult,
    evaluate,
    load_checkpoint,
    lr_at,
    overfit_probe,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
