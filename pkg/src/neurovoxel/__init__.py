"""Streaming EEG classification driving posterior-weighted voxel geometry."""

from .classifier import TrainedModel, cross_validate, predict_posterior, train_model
from .features import FeatureMatrix, WindowSpec, band_power, build_feature_matrix
from .formats import Config, load_model, load_session, save_model, save_session
from .geometry import BASE_SHAPES, VoxelGrid, blend, export_mesh, rasterize
from .selection import MrmrResult, mrmr_select
from .signal_core import (
    DEFAULT_BANDS,
    BandDefinition,
    EegRecording,
    TrialMarker,
    asr_calibrate,
    asr_clean,
    bandpass_filter,
    detect_bad_channels,
    extract_epochs,
)
from .stream import PosteriorFrame, decode_frame, encode_frame, run_pipeline, smooth
from .synth import SessionProtocol, SubjectProfile, generate_noise, generate_session
from .workflow import preprocess_session, validate_session

__version__ = "0.1.0"
