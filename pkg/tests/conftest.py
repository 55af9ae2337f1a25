from pathlib import Path

import pytest

from extham.pipeline import build, load_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
CONFIGS = sorted(CONFIG_DIR.glob("*.cfg"))

# lines printed by the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def config_path(name: str) -> Path:
    return CONFIG_DIR / f"{name}.cfg"


_built = {}


def built(name: str):
    """(ExtendedModel, base Model, PipelineConfig) for a shipped config, cached."""
    if name not in _built:
        cfg = load_config(config_path(name))
        model, base = build(cfg)
        _built[name] = (model, base, cfg)
    return _built[name]


@pytest.fixture(scope="session")
def pseudo2():
    return built("ex2_pseudosphere_m2")


@pytest.fixture(scope="session")
def pseudo1():
    return built("ex2_pseudosphere_m1")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
