"""Hot kernels: compiled extension when available, numpy fallback otherwise.

Set ``FIDENDRITE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as pykernels

ckernels = None
if os.environ.get("FIDENDRITE_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _ckernels as ckernels
    except ImportError:  # extension not built
        ckernels = None

_active = ckernels if ckernels is not None else pykernels

BACKEND = _active.BACKEND
expand_pairs = _active.expand_pairs
rasterize_disks = _active.rasterize_disks


def backends():
    """All importable kernel modules, fallback first."""
    return [pykernels] + ([ckernels] if ckernels is not None else [])
