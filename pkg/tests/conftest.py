import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scene():
    from wealthmap.synth import SceneConfig, generate_scene

    return generate_scene(SceneConfig(n_clusters=120, extent_deg=1.5, seed=3))


# Every explanation computed anywhere in the suite passes through
# tree_shap_matrix; record the worst relative local-accuracy gap seen.
LOCAL_ACCURACY = {"worst": 0.0, "count": 0}


@pytest.fixture(autouse=True, scope="session")
def _track_local_accuracy():
    from wealthmap import explain

    original = explain.tree_shap_matrix

    def tracked(ensemble, X):
        base, phi, pred = original(ensemble, X)
        gap = np.abs(base + phi.sum(axis=1) - pred) / np.maximum(1.0, np.abs(pred))
        if gap.size:
            LOCAL_ACCURACY["worst"] = max(LOCAL_ACCURACY["worst"], float(gap.max()))
            LOCAL_ACCURACY["count"] += int(gap.size)
        return base, phi, pred

    explain.tree_shap_matrix = tracked
    yield
    explain.tree_shap_matrix = original


def pytest_sessionfinish(session, exitstatus):
    if LOCAL_ACCURACY["count"]:
        ok = LOCAL_ACCURACY["worst"] <= 1e-9
        print(f"\nlocal accuracy over {LOCAL_ACCURACY['count']} explanations: "
              f"worst relative gap {LOCAL_ACCURACY['worst']:.3e} ({'PASS' if ok else 'FAIL'})")
        if not ok:
            session.exitstatus = 1


# test_acceptance.py records one line per criterion here
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
