"""Pick the compiled stepper if it imports, else the Python one."""
import os

from . import _pykernel

if os.environ.get("SPINMECH_PURE_PYTHON", "").strip() not in ("", "0"):
    step_block = _pykernel.step_block
    BACKEND = "python"
else:
    try:
        from ._kernel import step_block
        BACKEND = "cython"
    except ImportError:  # extension not built
        step_block = _pykernel.step_block
        BACKEND = "python"
