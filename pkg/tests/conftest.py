from pathlib import Path

import pytest

from ontoflow.bpmn import parse_bpmn
from ontoflow.reference import build_reference, build_table

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = [
    "elementary", "question_answer", "blackbox", "event_gateway",
    "laneset", "vendor_extension", "message_start", "deadlock",
]


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.bpmn"


def fixture_bytes(name: str) -> bytes:
    return fixture_path(name).read_bytes()


def load(name: str):
    return parse_bpmn(fixture_bytes(name))


@pytest.fixture(scope="session")
def ref():
    return build_reference()


@pytest.fixture(scope="session")
def table(ref):
    return build_table(ref)


@pytest.fixture(params=CORPUS)
def corpus_name(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines at the end of the run."""
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
