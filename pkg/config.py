import os
from dotenv import load_dotenv

load_dotenv()

class SpectralConfig:
    def __init__(self):
        # logging
        self.LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
        self.LOG_FILE = os.getenv('LOG_FILE', 'spectral_bounds.log')

        # quadrature (composite midpoint)
        self.INNER_PANELS = int(os.getenv('INNER_PANELS', '256'))
        self.OUTER_PANELS_PER_UNIT = int(os.getenv('OUTER_PANELS_PER_UNIT', '256'))
        self.MAX_OUTER_PANELS = int(os.getenv('MAX_OUTER_PANELS', '4096'))

        # Orlicz solvers
        self.LUXEMBURG_RTOL = float(os.getenv('LUXEMBURG_RTOL', '1e-10'))
        self.AMEMIYA_TOL = float(os.getenv('AMEMIYA_TOL', '1e-8'))
        self.SERIES_CUTOFF = float(os.getenv('SERIES_CUTOFF', '1e-4'))

        # inertia
        self.KERNEL_SHIFT = float(os.getenv('KERNEL_SHIFT', '1e-9'))
        self.DENSE_LIMIT = int(os.getenv('DENSE_LIMIT', '4000'))

        # bound constants (existence-only in theory; always echoed in reports)
        self.DEFAULT_THRESHOLD = float(os.getenv('DEFAULT_THRESHOLD', '0.046'))
        self.DEFAULT_PREFACTOR = float(os.getenv('DEFAULT_PREFACTOR', '7.61'))
        self.PRINTED_MEASURE_PREFACTOR = 7.16
        self.N_RANGE = (int(os.getenv('N_RANGE_MIN', '-20')), int(os.getenv('N_RANGE_MAX', '20')))

        # discretization
        self.DEFAULT_NY = int(os.getenv('DEFAULT_NY', '16'))
        self.TRUNCATION_FACTOR = float(os.getenv('TRUNCATION_FACTOR', '4'))
        self.RESOLUTION_DIVISOR = int(os.getenv('RESOLUTION_DIVISOR', '64'))
        self.MAX_NX = int(os.getenv('MAX_NX', '8192'))
        self.TAIL_CUTOFF = float(os.getenv('TAIL_CUTOFF', '64'))

        # execution
        self.MAX_WORKERS = int(os.getenv('MAX_WORKERS', '4'))
        self.SCHEMA_VERSION = int(os.getenv('SCHEMA_VERSION', '1'))

# settings singleton
CONFIG = SpectralConfig()
