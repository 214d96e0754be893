"""csisense: Wi-Fi CSI sensing toolkit.

Synthetic multipath CSI generation, amplitude preprocessing, SVD-based
location-dependency removal, texture features (Gabor bank and BoW over
dense gradient descriptors), and fused linear-SVM evaluation protocols.
"""

from .model import (CsiFrame, CsiTrace, DynamicPath, StaticPath, StaticPathSet,
                    SyntheticChannelConfig, TraceMeta, action_catalog,
                    action_speed_profile, generate_trace, tap_profile)
from .preprocess import StreamMatrix, butter_lowpass, interpolate, lowpass, normalize
from .denoise import SvdMode, remove_background, svd
from .features import (ChannelImage, Codebook, FeatureKind, FeatureVector, GaborBank,
                       bow_quantize, gabor_features, sift_descriptors, to_image,
                       train_codebook)
from .learn import (EvalReport, FeatureSet, FusionMode, FusionModel, KFold,
                    LeaveGroupOut, LinearSvm, SampleMeta, TrainSubsetScaling, TwoStage,
                    cross_validate, fuse_predict, make_folds, predict_proba, train_fusion,
                    train_svm, two_stage_classify)
from .pipeline import PipelineConfig, build_feature_set, extract_trace_features, fast_preset

__version__ = "0.1.0"
