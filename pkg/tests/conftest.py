import pytest

from baformer.kernels import _numba, _numpy


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Both kernel implementations, so every kernel test covers each path."""
    return _numba if request.param == "numba" else _numpy
