import pytest

from cellseg import _dispatch

LANES = ["compiled", "pure"] if _dispatch.compiled_available() else ["pure"]


@pytest.fixture(params=LANES)
def lane(request):
    """Run the test once per available kernel lane."""
    _dispatch.set_backend(request.param)
    yield request.param
    _dispatch.set_backend("auto")
