"""Backend dispatch for the numeric kernels.

The environment variable ``CZSL_BACKEND`` picks the implementation:

- unset, empty, or ``auto``: the compiled backend if numba imports
  cleanly, the pure-NumPy one otherwise
- ``numpy``: force the pure-NumPy backend
- ``numba``: force the compiled backend; an import failure propagates
  instead of being masked

Any other value raises at import time. ``BACKEND`` records which one won.
Both backends expose identical functions; everything above this package
imports them from here and never touches a backend module directly.
"""

import os

_CHOICE = os.environ.get("CZSL_BACKEND", "").strip().lower()

if _CHOICE in ("", "auto"):
    try:
        from czsl.kernels import numba_backend as _impl
        BACKEND = "numba"
    except ImportError:
        from czsl.kernels import numpy_backend as _impl
        BACKEND = "numpy"
elif _CHOICE == "numpy":
    from czsl.kernels import numpy_backend as _impl
    BACKEND = "numpy"
elif _CHOICE == "numba":
    from czsl.kernels import numba_backend as _impl
    BACKEND = "numba"
else:
    raise ValueError(
        "CZSL_BACKEND must be 'auto', 'numpy', or 'numba', got %r" % _CHOICE
    )

affine = _impl.affine
affine_relu = _impl.affine_relu
relu = _impl.relu
relu_backward = _impl.relu_backward
linear_backward = _impl.linear_backward
softmax = _impl.softmax
softmax_cross_entropy = _impl.softmax_cross_entropy
softmax_vjp = _impl.softmax_vjp
mse = _impl.mse
gaussian_kl = _impl.gaussian_kl
reparameterize = _impl.reparameterize
adam_update = _impl.adam_update

__all__ = [
    "BACKEND",
    "affine",
    "affine_relu",
    "relu",
    "relu_backward",
    "linear_backward",
    "softmax",
    "softmax_cross_entropy",
    "softmax_vjp",
    "mse",
    "gaussian_kl",
    "reparameterize",
    "adam_update",
]
