from __future__ import annotations

import pytest

from dpvqa import autodiff as T


@pytest.fixture(autouse=True, scope="session")
def _finite_checks():
    T.set_debug_checks(True)
    yield
    T.set_debug_checks(False)
