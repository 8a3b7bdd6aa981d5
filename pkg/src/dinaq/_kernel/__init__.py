"""Backend selection for the variational sweep kernel.

The compiled Cython kernel is preferred when the extension built; the
pure numpy implementation is the fallback. Set ``DINAQ_PURE_PYTHON=1``
to force the fallback (used by the backend-agreement tests and the
benchmark).
"""

import os

from . import pure

if os.environ.get("DINAQ_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = pure
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = pure

vb_sweep_loop = _impl.vb_sweep_loop
BACKEND = _impl.BACKEND_NAME
