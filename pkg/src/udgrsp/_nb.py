from __future__ import annotations

import numba


def jit(fn=None, **kw):
    opts = {"cache": True, "nogil": True}
    opts.update(kw)
    if fn is None:
        return numba.njit(**opts)
    return numba.njit(**opts)(fn)
