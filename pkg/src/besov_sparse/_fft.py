"""Thin wrappers around scipy.fft honouring BESOV_SPARSE_THREADS."""
import os

import scipy.fft as sfft


def workers():
    try:
        return max(1, int(os.environ.get("BESOV_SPARSE_THREADS", "1")))
    except ValueError:
        return 1


def rfftn(a):
    return sfft.rfftn(a, axes=(-3, -2, -1), workers=workers())


def irfftn(a, n):
    return sfft.irfftn(a, s=(n, n, n), axes=(-3, -2, -1), workers=workers())
