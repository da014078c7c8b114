"""Input record types, file ingestion, inclusion filtering, synthetic cohorts."""

from .inclusion import ExclusionReport, InclusionError, apply_inclusion
from .io import load_cohort, load_cohort_dir, write_cohort
from .records import (AssessmentRecord, AssessmentSeries, Cohort, ConfigError, Demographics,
                      EmbeddingRecord, EmbeddingStream, EventStream, Participant, ScreenRecord,
                      ValidationError)
from .synth import SynthConfig, load_synth_config, synth_cohort, synth_coupling

__all__ = [
    "AssessmentRecord", "AssessmentSeries", "Cohort", "ConfigError", "Demographics",
    "EmbeddingRecord", "EmbeddingStream", "EventStream", "ExclusionReport", "InclusionError",
    "Participant", "ScreenRecord", "SynthConfig", "ValidationError", "apply_inclusion",
    "load_cohort", "load_cohort_dir", "load_synth_config", "synth_cohort", "synth_coupling",
    "write_cohort",
]
