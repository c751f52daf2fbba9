import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vipelab.skeleton import default_skeleton
from vipelab.synth import GeneratorConfig, sample_pose

settings.register_profile("vipelab", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("vipelab")


@pytest.fixture(scope="session")
def skel():
    return default_skeleton()


@pytest.fixture(scope="session")
def poses(skel):
    rng = np.random.default_rng(1234)
    cfg = GeneratorConfig()
    return np.stack([sample_pose(rng, skel, cfg) for _ in range(64)])


def random_poses(skel, n, seed=0):
    rng = np.random.default_rng(seed)
    cfg = GeneratorConfig()
    return np.stack([sample_pose(rng, skel, cfg) for _ in range(n)])


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Record one pass/fail line per acceptance criterion; the lines are echoed at the end of the run."""
    def report(n: int, passed: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {n}: {'PASS' if passed else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
