"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``CLINFUSION_PURE_PYTHON=1`` to force the fallback.
"""
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

if os.environ.get("CLINFUSION_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"
        log.debug("compiled kernels unavailable; using pure-Python fallback")

sgns_document = _impl.sgns_document
perplexity_search = _impl.perplexity_search

__all__ = ["BACKEND", "perplexity_search", "sgns_document"]
