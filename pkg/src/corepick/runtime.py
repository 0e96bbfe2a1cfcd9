"""Process-level knobs: capping the BLAS thread pool behind `--threads`."""

import ctypes
import os

_ENV_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")


def _loaded_blas_paths():
    """Shared objects already mapped into this process that look like BLAS."""
    paths = set()
    try:
        with open("/proc/self/maps", "r", encoding="utf-8") as fh:
            for line in fh:
                part = line.rstrip("\n").split(" ", 5)[-1].strip()
                base = os.path.basename(part).lower()
                if part.startswith("/") and ("openblas" in base or "libblas" in base):
                    paths.add(part)
    except OSError:
        pass
    return sorted(paths)


def set_blas_threads(count: int) -> bool:
    """Cap the number of BLAS worker threads.

    Environment variables are set for libraries loaded later (and for child
    processes); libraries that are already loaded are adjusted through their
    `openblas_set_num_threads` entry points. Returns True if a loaded library
    accepted the cap.
    """
    count = max(1, int(count))
    for var in _ENV_VARS:
        os.environ[var] = str(count)
    applied = False
    # symbol name varies with build flavour (64-bit ints, scipy prefix)
    symbols = (
        "openblas_set_num_threads",
        "openblas_set_num_threads64_",
        "scipy_openblas_set_num_threads",
        "scipy_openblas_set_num_threads64_",
    )
    for path in _loaded_blas_paths():
        try:
            lib = ctypes.CDLL(path)
        except OSError:
            continue
        for symbol in symbols:
            fn = getattr(lib, symbol, None)
            if fn is not None:
                fn.argtypes = [ctypes.c_int]
                fn.restype = None
                fn(count)
                applied = True
    return applied
