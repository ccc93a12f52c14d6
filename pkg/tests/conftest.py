import numpy as np
import pytest

from ocdm.core import MemoryBuffer, Sample


def make_samples(label_sets, start=0):
    return [Sample(start + i, labels) for i, labels in enumerate(label_sets)]


def full_buffer(label_sets, capacity=None):
    samples = make_samples(label_sets)
    buf = MemoryBuffer(capacity or len(samples))
    for s in samples:
        buf.insert(s)
    return buf


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def report_criterion(number, title, passed, detail):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
