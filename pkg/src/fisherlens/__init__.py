"""Facial emotion recognition: Haar-cascade face detection plus a Fisherface
(PCA + LDA) classifier, with a seeded evaluation harness and CLI."""

from .cascade import (
    CascadeModel,
    Detection,
    detect_face_sequence,
    detect_multiscale,
    load_cascade_file,
    load_cascade_sequence,
    packaged_cascade_dir,
    parse_cascade,
)
from .dataset import (
    DatasetManifest,
    EmotionLabel,
    Rng,
    SampleRecord,
    glob_match,
    ingest_ck,
    parse_label,
    prepare_faces,
    split,
)
from .errors import (
    CascadeFormatError,
    EmptyResultError,
    FisherlensError,
    IngestError,
    ModelFormatError,
    NetpbmError,
    NumericalError,
    RankError,
    SplitError,
    UnsupportedCascadeError,
)
from .evaluate import ConfusionMatrix, TrialConfig, TrialReport, run_repeated, run_trial
from .fisherface import (
    FisherModel,
    Prediction,
    SampleMatrix,
    eigen_symmetric,
    lda_fit,
    load_model,
    pca_fit,
    predict,
    save_model,
    train_fisherface,
)
from .imgproc import (
    GrayImage,
    IntegralImage,
    Rect,
    RgbImage,
    crop,
    gray_average,
    gray_luminosity,
    integral,
    iou,
    resize_bilinear,
)
from .netpbm import parse_netpbm, read_image, write_image

__version__ = "0.1.0"
