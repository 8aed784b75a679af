"""Allocator tuning for the training loop.

Each training step allocates and frees a few hundred multi-megabyte
arrays. glibc serves blocks that large with fresh ``mmap`` calls by
default, so every step pays for page faults on memory it just returned.
Raising the mmap and trim thresholds keeps those blocks on the heap.
Non-glibc platforms are left alone.
"""

import ctypes
import ctypes.util
import sys

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3
_THRESHOLD = 1 << 30

_done = False


def tune_allocator():
    """Apply the heap thresholds once per process; returns True on success."""
    global _done
    if _done:
        return True
    if not sys.platform.startswith("linux"):
        return False
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    mallopt.argtypes = (ctypes.c_int, ctypes.c_int)
    ok = mallopt(_M_MMAP_THRESHOLD, _THRESHOLD) == 1
    ok = mallopt(_M_TRIM_THRESHOLD, _THRESHOLD) == 1 and ok
    _done = ok
    return ok
