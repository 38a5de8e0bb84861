"""Link-level simulation of multi-stage deep CSI acquisition for RIS-aided MIMO uplink."""

import os as _os

# RISCSI_THREADS caps the BLAS thread pool; it only takes effect when set
# before numpy is first imported.
if "RISCSI_THREADS" in _os.environ:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["RISCSI_THREADS"])

__version__ = "0.1.0"
