import shutil
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"
PIPELINE = DATA / "pipeline"

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class AcceptanceLog:
    """Records one outcome per acceptance criterion for the summary table."""

    def __call__(self, number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
        assert passed, f"criterion {number} failed: {detail}"


@pytest.fixture
def acceptance() -> AcceptanceLog:
    return AcceptanceLog()


@pytest.fixture
def pipeline_dir(tmp_path: Path) -> Path:
    """A private copy of the bundled pipeline fixture."""
    dest = tmp_path / "pipeline"
    shutil.copytree(PIPELINE, dest, ignore=shutil.ignore_patterns("out", "__pycache__"))
    return dest


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
