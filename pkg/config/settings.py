"""
Height Lab Configuration
========================
Defaults for the family parameter, truncation, numerics, cache and logging.
Every value can be overridden through the environment (or a .env file).
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


# =============================================================================
# FAMILY
# =============================================================================

# Multiplier of the marked fixed point, as "a/b" or "a"
DEFAULT_LAMBDA = os.getenv('HEIGHTLAB_LAMBDA', '2')

# Homogeneous lift of f_t: 'std' (lambda*t2*z1*z2) or 'paper-literal' (lambda*t2*z1^2)
DEFAULT_LIFT = os.getenv('HEIGHTLAB_LIFT', 'std')
SUPPORTED_LIFTS = ['std', 'paper-literal']

# Escape-rate limit: 'log-plain' (log||F_n||) or 'log-plus' (log+ ||F_n||)
DEFAULT_ESCAPE = os.getenv('HEIGHTLAB_ESCAPE', 'log-plain')
SUPPORTED_ESCAPES = ['log-plain', 'log-plus']


# =============================================================================
# TRUNCATION
# =============================================================================

DEFAULT_PRIME_BOUND = int(os.getenv('HEIGHTLAB_P', '100'))     # places p <= P
DEFAULT_N_MAX = int(os.getenv('HEIGHTLAB_N_MAX', '8'))         # symbolic depth
N_MAX_CAP = 10                                                 # hard cap on depth
MAX_COEFF_BITS = 4_000_000                                     # memory guard per coefficient

# Series tolerance for gamma_v
DEFAULT_TOL = float(os.getenv('HEIGHTLAB_TOL', '1e-12'))

# Orbit blowup bound H0: stop once h(z_n) > H0 + n*log(4)
ORBIT_HEIGHT_BOUND = float(os.getenv('HEIGHTLAB_ORBIT_H0', '16.0'))
DEFAULT_ORBIT_BUDGET = 64

# Iterations of the renormalized local-height recursion
LOCAL_HEIGHT_STEPS = 64
DIRECT_HEIGHT_LEVEL = 16


# =============================================================================
# NUMERICS
# =============================================================================

DEFAULT_GRID = int(os.getenv('HEIGHTLAB_GRID', '64'))          # radii scan resolution
MIN_GRID = 64
DEFAULT_SEED = int(os.getenv('HEIGHTLAB_SEED', '7'))
DEFAULT_PRECISION_DIGITS = int(os.getenv('HEIGHTLAB_PRECISION_DIGITS', '16'))
FLOAT_DIGITS = 16                                              # above this mpmath takes over

# Root finder
ROOT_EPS = float(os.getenv('HEIGHTLAB_EPS_ROOT', '1e-10'))
ROOT_MAX_ITER = 500
ROOT_RESTARTS = 4
ROOT_CERTIFY_DIGITS = 40
ROOT_POLISH_STEPS = 8                                          # mpmath Newton steps per root

# L estimate
JACKKNIFE_GROUPS = 16
DEFAULT_PROXY_LEVEL = 7
L_TAIL_RATIO_CAP = 0.9                                          # geometric tail of the level-to-level drift


# =============================================================================
# CACHE
# =============================================================================

CACHE_DIR = os.getenv('HEIGHTLAB_CACHE', '.heightlab_cache')
CACHE_VERSION = 'v1'


# =============================================================================
# LOGGING
# =============================================================================

LOG_LEVEL = os.getenv('HEIGHTLAB_LOG_LEVEL', 'INFO')
LOG_FILE = os.getenv('HEIGHTLAB_LOG_FILE', 'logs/heightlab.log')
