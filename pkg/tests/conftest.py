import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

from lmmbench.lmm import TargetSpec, generate_dataset  # noqa: E402
from lmmbench.seeding import stream  # noqa: E402
from lmmbench.spectrum import EigenSpectrum  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def small_dataset():
    def make(n=8, p=16, sigma_x=0.4, sigma_y=0.5, spec=None, seed=0, theta=None):
        spec = EigenSpectrum.finite(4) if spec is None else spec
        target = TargetSpec.cos3(spec) if theta is None else TargetSpec(theta)
        return generate_dataset(spec, target, n, p, sigma_x, sigma_y, stream(seed, "fixture"))

    return make


@pytest.fixture
def acceptance_report(request):
    """Print and remember one PASS/FAIL line per acceptance criterion."""

    def report(label: str, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        capman = request.config.pluginmanager.getplugin("capturemanager")
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
