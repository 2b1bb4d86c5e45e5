DEFAULT_LOG_FMT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# EXPERIMENTS
DEFAULT_DELTA = 1 / 100
DEFAULT_N_SAMPLES = 100000
DEFAULT_SEED = 20100301
DEFAULT_X_PARAMS = [0.25, 0.5, 0.75]
DEFAULT_SWEEP_DELTAS = [1 / 10, 1 / 20, 1 / 40]
DEFAULT_SWEEP_P_VALUES = [0.4, 0.5, 0.6]
DEFAULT_PREDICT_K_VALUES = [1, 2**-.5, 2]
DEFAULT_WINDOW_RADIUS = 16
DEFAULT_PERIODS = [[1, 0], [0, 1]]

# verdict tolerances
CI_HALF_WIDTHS = 3
FINITE_DELTA_COEF = .5
FINITE_DELTA_EXP = 1 / 3

# WORKERS
# neither value changes any result, only how the sample range is scheduled
DEFAULT_N_JOBS = 1
DEFAULT_BLOCK_SIZE = 500

# OUTPUT
FLOAT_FMT = '%.12g'
