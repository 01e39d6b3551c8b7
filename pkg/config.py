import os

from dotenv import load_dotenv

load_dotenv()

# Legendre features
LEGENDRE_MAX_DEGREE = 64
DOMAIN_TOLERANCE = 1e-12
INDEX_SET_CAP = 100000
SCALE_GRID_POINTS = 50000 # dense grid used to compute the global feature rescaling

# Environments
TRANSITION_NOISE_STD = 0.1
REWARD_NOISE_STD = 0.0
ACTION_GRID_SIZE = 21 # points per action dimension
SMOOTH_MDP_CONCENTRATION = 8.0
SMOOTH_MDP_HORIZON = 5
TABULAR_STATES = 5
TABULAR_ACTIONS = 2
TABULAR_HORIZON = 5

# LSVI-UCB
BONUS_SCALE = 1.0 # c_beta
RIDGE = 1.0 # lambda
DELTA = 0.05

# Eleanor
ELEANOR_BASE = 2.0
ELEANOR_SLACK = 1e-3
ELEANOR_BUDGET = 400
ELEANOR_MIN_STEP = 1e-3
ELEANOR_RESTART_EVALUATIONS = 100 # candidates per restart before the next random start
ELEANOR_MAX_FEATURES = 64
ELEANOR_MAX_HORIZON = 10

# Validation
QUADRATURE_ORDER = 64
PROJECTION_QUADRATURE_ORDER = 1024
RATE_GRID_POINTS = 10000
DEGENERATE_ERROR = 1e-10
IBE_STATE_GRID = 101
IBE_ACTION_GRID = 21
IBE_DENSITY_TOLERANCE = 1e-6

# DP oracle
ORACLE_STATE_GRID = 81
ORACLE_ACTION_GRID = 21
ORACLE_HERMITE_ORDER = 8
ORACLE_MEMORY_CAP = 60_000_000 # max interpolation queries per stage
ORACLE_CHUNK_STATES = 1024 # grid states whose successors are interpolated together

# Harness
CI_Z = 1.96
FINAL_WINDOW = 100 # episodes whose mean return is compared across feature kinds
EARLY_WINDOW = 100 # episodes the linear regret extrapolation starts from
SUBLINEAR_RATIO = 0.6
BENCHMARK_HORIZON = 20

# SMOOTH_RL_THREADS caps the number of concurrent runs
MAX_WORKERS = int(os.getenv("SMOOTH_RL_THREADS", "0")) or (os.cpu_count() or 1)
# SMOOTH_RL_DB overrides the run ledger location (default: <output_dir>/runs.db)
DB_PATH = os.getenv("SMOOTH_RL_DB", "")
