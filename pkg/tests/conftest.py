import pytest

from evsc.synth import DatasetConfig, generate_dataset, render_grid_features


@pytest.fixture(scope="session")
def small_config():
    return DatasetConfig(clips_per_verb=25, val_clips_per_verb=5, seed=7)


@pytest.fixture(scope="session")
def small_clips(small_config):
    return generate_dataset(small_config)


@pytest.fixture(scope="session")
def small_packs(small_clips):
    return {c.clip_id: render_grid_features(c) for c in small_clips}


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(n, ok, detail)."""
    def record(n: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[n] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
