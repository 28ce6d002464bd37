"""Backend selection for the pairwise particle kernels.

Prefers the compiled extension when it built; set OPVI_FIELDOPS=python to
force the numpy fallback (or OPVI_FIELDOPS=compiled to fail loudly when
the extension is missing).
"""
import os

from opvi import _fieldops_py

_choice = os.environ.get("OPVI_FIELDOPS", "auto")

if _choice == "python":
    _impl = _fieldops_py
elif _choice == "compiled":
    from opvi import _fieldops as _impl
elif _choice == "auto":
    try:
        from opvi import _fieldops as _impl
    except ImportError:
        _impl = _fieldops_py
else:
    raise ValueError(f"OPVI_FIELDOPS must be auto, python or compiled, got {_choice!r}")

BACKEND = _impl.BACKEND
pairwise_sq_dists = _impl.pairwise_sq_dists
rbf_field = _impl.rbf_field
energy_stats = _impl.energy_stats
