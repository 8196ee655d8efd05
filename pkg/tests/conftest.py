from __future__ import annotations

import os
import time

import pytest
from hypothesis import HealthCheck, settings

from qunt.benchmark import BenchmarkCase, reference_solution

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# production reference used by the acceptance checks
REF_NX, REF_DT, REF_SAVE_DT, REF_GRADING = 3001, 1e-4, 5e-3, 0.95

_ACCEPTANCE: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    """Queue one line for the acceptance summary printed at the end of the run."""
    _ACCEPTANCE.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case() -> BenchmarkCase:
    return BenchmarkCase()


@pytest.fixture(scope="session")
def reference(case, request):
    """Fine graded-mesh CN reference; cached on disk between runs, keyed by its inputs."""
    cache = request.config.cache.mkdir("qunt-reference")
    tic = time.perf_counter()
    ref = reference_solution(case, REF_NX, REF_DT, REF_SAVE_DT, REF_GRADING, cache_dir=cache)
    ref.build_seconds = time.perf_counter() - tic
    return ref
