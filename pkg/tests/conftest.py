import pytest

from leadsel import Instance


@pytest.fixture
def instance_a() -> Instance:
    """Three UEs with hand-checkable scores, used throughout the suite."""
    return Instance(3, (7, 2, 5), ((0, 3, 8), (6, 0, 2), (4, 9, 0)))
