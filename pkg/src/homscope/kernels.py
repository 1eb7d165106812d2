"""Backend selection for the detection hot loop.

The compiled extension is used when it imports; otherwise the numpy version
is used.  Setting ``HOMSCOPE_PURE_PYTHON=1`` forces the numpy backend.
"""

import os

from . import _kernels_py

BACKEND = "python"
detect_pairs = _kernels_py.detect_pairs

if os.environ.get("HOMSCOPE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ext import detect as _detect_ext
    except ImportError:
        pass
    else:
        detect_pairs = _detect_ext.detect_pairs
        BACKEND = "cython"

CODE_11_A_TO_D = _kernels_py.CODE_11_A_TO_D
CODE_11_A_TO_C = _kernels_py.CODE_11_A_TO_C
CODE_20 = _kernels_py.CODE_20
CODE_02 = _kernels_py.CODE_02
