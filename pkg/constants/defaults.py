# Численные значения по умолчанию для всех модулей

# model
RNG_BLOCK_SIZE = 4096  # узлов на один счетчиковый поток
SUPPORT_MERGE_TOL = 1e-12
NORMALIZATION_TOL = 1e-12

# transfer
CONTRACTING_SNAP_TOL = 1e-12  # ниже этого компонента по растущему направлению считается нулем
SL2_DET_TOL = 1e-9
DET_BLOCK_LOG = 8.0  # log‖M‖ на блок при проверке определителя

# furstenberg
FURSTENBERG_GRID = 2048
FURSTENBERG_MIN_GRID = 64
FURSTENBERG_TOL = 1e-10
FURSTENBERG_MAX_ITER = 20000
QUADRATURE_NODES = 64  # узлов Гаусса-Лежандра на кусок плотности

# spectra
CENSUS_R2_THRESHOLD = 0.9
CENSUS_GAMMA_THRESHOLD = 0.02
CENSUS_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
MIN_FIT_SITES = 4

# dynamics
T_GRID_POINTS = 256
T_GRID_MIN = 0.1
T_GRID_MAX = 1e3

# rank_one
LAMBDA_MAX = 1e4
TAIL_TOLERANCE = 0.1
QUAD_LIMIT = 2000

# kunz_souillard
KS_GRID_X = 64.0
KS_GRID_N = 2 ** 14
KS_ASSEMBLY_N = 2 ** 12
KS_E_POINTS = 64
KS_REFINE_X = 2.0  # уточненный прогон ρ_L: полуширина X·KS_REFINE_X
KS_REFINE_N = 4  # и N·KS_REFINE_N узлов
POWER_ITERATIONS = 50
POWER_TOL = 1e-10
DEGENERATE_PHI0 = 1e-8
JACOBIAN_STEP = 1e-5
