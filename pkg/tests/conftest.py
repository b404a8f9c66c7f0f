import importlib.resources

import pytest


@pytest.fixture
def scenario_path():
    def _path(name: str) -> str:
        return str(importlib.resources.files("trustsdn") / "scenarios" / name)
    return _path
