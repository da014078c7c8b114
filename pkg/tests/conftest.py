import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from traj_harness.datamodel import (AssessmentSeries, Cohort, Demographics, EmbeddingStream,
                                    EventStream, Participant, SynthConfig, apply_inclusion,
                                    synth_cohort)
from traj_harness.evaluation.splits import assign_splits
from traj_harness.features.design import build_design_matrix

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DAY = 86400.0
T0 = 1_600_000_000.0


def make_participant(pid, cesd, ts=None, events=(), missingness=None, age=30,
                     gender="female", race=("white",), ethnicity="non_hispanic",
                     income="lt_25k", embeddings=None, utc_offset=0.0):
    n = len(cesd)
    ts = np.asarray(ts if ts is not None else T0 + 14 * DAY * np.arange(n), dtype=float)
    miss = np.zeros(n) if missingness is None else np.asarray(missingness, dtype=float)
    if len(events):
        et, apps, social = zip(*events)
        ev = EventStream(np.array(et, float), np.array(apps, str), np.array(social, bool))
    else:
        ev = EventStream.empty()
    em = EmbeddingStream.empty(4) if embeddings is None else EmbeddingStream(*embeddings)
    demo = Demographics(pid, age, gender, frozenset(race), ethnicity, income, utc_offset)
    return Participant(demo, AssessmentSeries(np.arange(n), ts, np.asarray(cesd), miss), ev, em)


def make_cohort(participants) -> Cohort:
    return Cohort({p.participant_id: p for p in participants})


SMALL = dict(n_participants=16, n_assessments=14, sessions_per_day=3.0,
             screens_per_session=3.0)


@pytest.fixture(scope="session")
def small_cohort():
    c, _ = apply_inclusion(synth_cohort(SynthConfig(**SMALL), seed=3))
    return c


@pytest.fixture(scope="session")
def small_matrix(small_cohort):
    splits = assign_splits(small_cohort)
    return build_design_matrix(small_cohort, splits, vif_candidates=True)


# -- acceptance summary ------------------------------------------------------

def pytest_configure(config):
    config.acceptance_lines = {}


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.acceptance_lines

    def record(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        lines[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
