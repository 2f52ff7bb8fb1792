import numpy as np
import pytest

from cohgram.ingestion import ClassLabel, MultichannelRecording, TrialMeta

FS = 200.0

_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_recording(data, fs=FS, subject="s01", session=1, trial=1, label=ClassLabel.NEUTRAL):
    return MultichannelRecording(np.asarray(data), fs, meta=TrialMeta(subject, session, trial, label))


@pytest.fixture
def noise_recording(rng):
    return make_recording(rng.standard_normal((6, int(20 * FS))))
