"""EEG connectivity feature images.

Each trial becomes a C x C x 3 image: mean phase coherence above the diagonal,
band-averaged magnitude squared coherence below it, differential entropy on
the diagonal, one plane per band (alpha, beta, gamma).
"""
from ._kernels import BACKEND
from .assembly import (
    ConnectivityMatrix,
    FeatureImage,
    assemble_band,
    assemble_planes,
    build_image,
    build_images,
    export_image,
    extract_dataset,
    normalize_diagonal,
)
from .config import PipelineConfig
from .dsp import (
    ALPHA,
    BETA,
    DEFAULT_BANDS,
    GAMMA,
    BandDefinition,
    CrossSpectrum,
    FilterSpec,
    PhaseSeries,
    WelchParams,
    analytic_phase,
    bandpass,
    welch_auto,
    welch_cross,
)
from .evaluation import (
    BaselineModel,
    EvaluationReport,
    Hyper,
    SplitPlan,
    cohens_kappa,
    evaluate,
    make_splits,
    train_baseline,
)
from .features import band_msc, channel_de, differential_entropy, mpc, msc_spectrum
from .ingestion import (
    ClassLabel,
    MultichannelRecording,
    TrialMeta,
    load_recording,
    read_tensor,
    save_recording,
    write_tensor,
)
from .synth import OscillatorSpec, SynthDatasetSpec, gen_common_source, gen_coupled, gen_labeled_dataset

__version__ = "0.1.0"
