"""Hot kernels, compiled when available.

The Cython extension ``_ckernels`` is preferred; the numpy fallback in
``_pykernels`` is used if the extension is missing or if the environment
variable ``HOTM_PURE_PYTHON`` is set to a non-empty value other than ``0``.
``BACKEND`` names the implementation in use.
"""
import os

from . import _pykernels

if os.environ.get("HOTM_PURE_PYTHON", "0") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

mul = _impl.mul
monomials = _impl.monomials
eval_map = _impl.eval_map
rk87_step = _impl.rk87_step
ecchill_fast_rhs = _impl.ecchill_fast_rhs
mee_gauss_rhs = _impl.mee_gauss_rhs

__all__ = ["BACKEND", "mul", "monomials", "eval_map", "rk87_step", "ecchill_fast_rhs",
           "mee_gauss_rhs"]
