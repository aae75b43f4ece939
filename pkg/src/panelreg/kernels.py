"""Backend selection for the split-scan, neighbour-search and MLP kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``PANELREG_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("PANELREG_PURE_PYTHON", "") not in ("", "0"):
    best_split = _kernels_py.best_split
    knn_query = _kernels_py.knn_query
    mlp_loss_grad = _kernels_py.mlp_loss_grad
else:
    try:
        from ._kernels import best_split, knn_query, mlp_loss_grad
        BACKEND = "cython"
    except ImportError:
        best_split = _kernels_py.best_split
        knn_query = _kernels_py.knn_query
        mlp_loss_grad = _kernels_py.mlp_loss_grad


def available_backends():
    """Map backend name to its module of kernel functions."""
    backends = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        backends["cython"] = _kernels
    return backends
