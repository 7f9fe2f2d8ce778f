"""Work quasiprobability distributions for sudden quenches of the
transverse-field Ising chain."""
from .model import PhaseProfile, QuenchSpec, dispersion, dvector, momenta, parity_signs, partition_function

__all__ = ["PhaseProfile", "QuenchSpec", "dispersion", "dvector", "momenta", "parity_signs", "partition_function"]
__version__ = "0.1.0"
