import numpy as np

# Doctests were written against NumPy 1.x scalar reprs (``True`` rather than ``np.True_``).
try:
    np.set_printoptions(legacy='1.25')
except (TypeError, ValueError):  # NumPy < 2
    pass
