"""Hot numeric kernels with a compiled core and a NumPy fallback.

The Cython extension is optional: if it failed to build (or
STRATEVAL_NO_EXT is set) the pure-NumPy implementation is used instead.
Both backends implement the same contract; `BACKEND` records which one won.
"""

import os

if os.environ.get("STRATEVAL_NO_EXT"):
    from . import _ref as _impl

    BACKEND = "python"
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _ref as _impl

        BACKEND = "python"

knn_predict = _impl.knn_predict

__all__ = ["knn_predict", "BACKEND"]
