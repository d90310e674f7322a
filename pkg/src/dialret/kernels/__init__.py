"""Hot numeric kernels with backend selection at import time.

The compiled extension (``_ckern``) is preferred when present; otherwise
the numpy implementation is used. Set ``DIALRET_KERNELS=numpy`` or
``DIALRET_KERNELS=c`` to force a backend (forcing ``c`` raises if the
extension was not built).
"""

from __future__ import annotations

import os

_requested = os.environ.get("DIALRET_KERNELS", "auto").lower()

if _requested not in ("auto", "c", "numpy"):
    raise ValueError(f"DIALRET_KERNELS must be auto, c or numpy, not {_requested!r}")

if _requested == "numpy":
    from dialret.kernels import _numpy as _impl
else:
    try:
        from dialret.kernels import _ckern as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "c":
            raise
        from dialret.kernels import _numpy as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND_NAME

softmax_scores = _impl.softmax_scores
pair_losses = _impl.pair_losses
sym_loss_and_grads = _impl.sym_loss_and_grads


def available_backends() -> dict[str, object]:
    """All importable backend modules, keyed by name (for tests/benchmarks)."""
    from dialret.kernels import _numpy

    found: dict[str, object] = {"numpy": _numpy}
    try:
        from dialret.kernels import _ckern

        found["c"] = _ckern
    except ImportError:
        pass
    return found
