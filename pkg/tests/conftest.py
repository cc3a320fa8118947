"""Pin BLAS to one thread before numpy loads anywhere in the suite, so
timing-sensitive tests compare single-threaded work on both sides."""

import os

for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(var, "1")
