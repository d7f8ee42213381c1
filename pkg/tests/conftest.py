from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from logentropy import failgen, ngram
from logentropy.ingest import record_tokens

settings.register_profile("default", deadline=None, max_examples=100)
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", deadline=None, max_examples=20)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def openstack_case():
    return failgen.openstack_shape(7)


@pytest.fixture(scope="session")
def openstack_model():
    base = failgen.openstack_baseline(7)
    return ngram.train([record_tokens(r) for r in base.records], 5, 1.0)


ACCEPTANCE_LINES = pytest.StashKey[list]()


class Criterion:
    """Records one acceptance verdict; the summary lists every verdict."""

    def __init__(self) -> None:
        self.line: str | None = None

    def check(self, number: int, title: str, ok: bool, detail: str) -> bool:
        self.line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
        print(self.line)
        return ok


@pytest.fixture()
def criterion(request):
    rec = Criterion()
    yield rec
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])
    lines.append(rec.line or f"[FAIL] {request.node.name}: did not complete")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
