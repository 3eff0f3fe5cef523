import pytest
from hypothesis import settings

from msfactory.workload import reference_workload

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def im():
    return reference_workload("im")


@pytest.fixture(scope="session")
def gse():
    return reference_workload("gse")
