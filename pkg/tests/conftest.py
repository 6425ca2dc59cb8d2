import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("fast", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fast"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="auch die langen Akzeptanzläufe ausführen")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="braucht --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _isolated_home(tmp_path, monkeypatch):
    # Keine Logs/Konfigurationen im echten Home-Verzeichnis
    home = tmp_path / "home"
    monkeypatch.setattr("src.logging_setup.APP_DIR", home)
    monkeypatch.setattr("src.settings_store.LAST_CONFIG_FILE", home / "last_experiment.cfg")
    monkeypatch.delenv("SPLITTREE_WORKERS", raising=False)
