import functools
import sys
import time
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from cqp_loqc.models import build, environment_for, load_source  # noqa: E402
from cqp_loqc.semantics import explore  # noqa: E402

settings.register_profile("default", deadline=None)
settings.load_profile("default")

CORPUS = Path(__file__).resolve().parents[1] / "src" / "cqp_loqc" / "models"

# criterion number -> (title, passed, detail)
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def criterion(number: int, title: str):
    """Record a pass/fail line for an acceptance test, then let pytest judge it."""
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs) or ""
            except BaseException as exc:
                ACCEPTANCE[number] = (title, False, f"{type(exc).__name__}: {exc}".splitlines()[0])
                raise
            ACCEPTANCE[number] = (title, True, f"{detail} ({time.perf_counter() - t0:.1f}s)".strip())
        return inner
    return wrap


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} - {detail}")


@functools.lru_cache(maxsize=None)
def graph_for(model: str, spec):
    """Explored graph for a model and input, shared across tests."""
    return explore(build(model), environment_for(spec, model))


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def model_source():
    return load_source
