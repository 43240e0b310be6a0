import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from medmsa import synthesis
from medmsa.config import PipelineConfig
from medmsa.lm import ReplayBackend
from medmsa.synthesis import Vignette

FIXTURE_DIR = REPO / "fixtures" / "lm"
DATA = REPO / "data"
PROGRAMS = DATA / "programs"


@pytest.fixture(scope="session")
def repo() -> Path:
    return REPO


@pytest.fixture(scope="session")
def fixture_config() -> PipelineConfig:
    config = PipelineConfig.load(REPO / "fixture_config.json")
    return config.with_overrides(
        fixture_dir=str(FIXTURE_DIR), overrides_path=str(DATA / "overrides.json")
    )


@pytest.fixture(scope="session")
def clean_programs() -> list[Path]:
    return sorted((PROGRAMS / "clean").glob("*.medppl"))


@pytest.fixture(scope="session")
def commented_programs() -> list[Path]:
    return sorted((PROGRAMS / "commented").glob("*.medppl"))


@pytest.fixture(scope="session")
def marie_source() -> str:
    return (PROGRAMS / "marie.medppl").read_text()


def load_vignette(name: str) -> Vignette:
    return Vignette.load(DATA / "vignettes" / f"{name}.json")


def build_run(vignette_name: str, k: int, seed: int, config: PipelineConfig, root: Path):
    """Run the replay pipeline with a fresh backend; AllCandidatesFailed runs
    are returned, not raised."""
    lm = ReplayBackend(config.fixture_dir)
    vignette = load_vignette(vignette_name)
    try:
        return synthesis.run_pipeline(vignette, k, seed, config, lm, root)
    except synthesis.AllCandidatesFailed as exc:
        return exc.run, exc.run_dir


@pytest.fixture(scope="session")
def run_v1(fixture_config, tmp_path_factory):
    return build_run("vignette1", 20, 7, fixture_config, tmp_path_factory.mktemp("v1"))


@pytest.fixture(scope="session")
def run_v2(fixture_config, tmp_path_factory):
    return build_run("vignette2", 20, 7, fixture_config, tmp_path_factory.mktemp("v2"))


@pytest.fixture(scope="session")
def run_v3(fixture_config, tmp_path_factory):
    return build_run("vignette3", 20, 7, fixture_config, tmp_path_factory.mktemp("v3"))


@pytest.fixture(scope="session")
def run_v4(fixture_config, tmp_path_factory):
    return build_run("vignette4", 20, 7, fixture_config, tmp_path_factory.mktemp("v4"))


@pytest.fixture(scope="session")
def run_v2_k3(fixture_config, tmp_path_factory):
    return build_run("vignette2", 3, 7, fixture_config, tmp_path_factory.mktemp("v2k3"))


@pytest.fixture(scope="session")
def run_v1_k1(fixture_config, tmp_path_factory):
    return build_run("vignette1", 1, 7, fixture_config, tmp_path_factory.mktemp("v1k1"))


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_acceptance_" not in nodeid:
                continue
            name = nodeid.split("test_acceptance_")[-1]
            lines.append((name, outcome.upper()))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, outcome in sorted(set(lines)):
            terminalreporter.write_line(f"ACCEPTANCE {name}: {outcome}")
