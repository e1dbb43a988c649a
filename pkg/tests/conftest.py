import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from anythreat.datamodel import Instance, Label  # noqa: E402

ACCEPTANCE = []


def make_instances(X, anomalous=False, user="u", threat="T", start=0):
    """Instances from rows of ``X`` with one label."""
    out = []
    for i, row in enumerate(np.asarray(X, dtype=float)):
        if anomalous:
            out.append(Instance(start + i, user, tuple(row), Label.ANOMALOUS, threat_id=threat))
        else:
            out.append(Instance(start + i, user, tuple(row), Label.NORMAL))
    return out


@pytest.fixture
def acceptance():
    """Record one acceptance line: acceptance(number, passed, detail)."""
    def record(number, passed, detail):
        ACCEPTANCE.append((number, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
