import io
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cellgraph.synth import default_profiles, gen_city  # noqa: E402


def as_stream(text: str) -> io.BytesIO:
    return io.BytesIO(text.encode("utf-8"))


@pytest.fixture(scope="session")
def clean_city():
    return gen_city(default_profiles(0.0), 15, 7, 3600, seed=11)


@pytest.fixture(scope="session")
def noisy_city():
    return gen_city(default_profiles(0.1), 15, 7, 3600, seed=11)


_acceptance_lines: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; returns the verdict."""
    def report(number: int, ok: bool, detail: str, soft: bool = False) -> bool:
        verdict = "PASS" if ok else ("SOFT-FAIL" if soft else "FAIL")
        line = f"criterion {number:>2}: {verdict}  {detail}"
        _acceptance_lines.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
