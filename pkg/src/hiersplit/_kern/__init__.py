"""Kernel backend selection.

The hot inner loops (perspective prox root solve, fused TREX iteration) exist
twice: a Cython extension ``_ckernels`` and a pure-NumPy mirror
``_pykernels``.  The compiled module is preferred when importable; set
``HIERSPLIT_KERNEL=pure`` (or ``compiled``) to force a backend.
``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _pykernels

_choice = os.environ.get("HIERSPLIT_KERNEL", "auto").lower()

if _choice == "pure":
    _impl = _pykernels
elif _choice == "compiled":
    from . import _ckernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND
tau_root = _impl.tau_root
perspective_prox = _impl.perspective_prox
perspective_value = _impl.perspective_value
soft_threshold = _impl.soft_threshold
drs1_trex_run = _impl.drs1_trex_run


def backend_name():
    """Name of the active kernel backend ('compiled' or 'pure')."""
    return BACKEND
