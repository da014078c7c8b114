"""Period segmentation, behavioral features, design matrix, VIF, scaling."""

from .design import (BASE, BEHAVIORAL, DELTAS, DEMOGRAPHIC, FEATURES, LAGS, LEVELS,
                     PERSON_MEAN, PRIOR, VIF_EXCLUDED, build_design_matrix,
                     period_feature_table, person_means, with_person_mean)
from .periods import (FeatureError, ObservationPeriod, PeriodFeatures, Session, clip_dispersion,
                      compute_period_features, segment_periods, session_ids, sessionize)
from .scaling import Scaler, apply_scaler, fit_scaler
from .vif import vif_screen, vif_values
