from fractions import Fraction

# Physical constants of the firn model (SI-derived units, years for time)
OPEN_PORE_FRACTION = 0.2  # f
DECAY_RATE = 10.03  # G = tau + lambda, 1/yr
ADVECTION_SPEED = 685.0  # F = v + w_air, m/yr
GRAVITATIONAL_FACTOR = 1.8134e-4  # M_alpha = M g / (R T), 1/m

CO2_MOLAR_MASS = 0.04  # kg/mol
GRAVITY = 9.8  # m/s^2
GAS_CONSTANT = 8.314  # J/(mol K)
FIRN_TEMPERATURE = 260.0  # K

# rho_atm(t) = amplitude * (Te * t) ** exponent
ATMOSPHERIC_AMPLITUDE = 2.0
ATMOSPHERIC_EXPONENT = 0.25

DEFAULT_R_ALPHAS = (0.5, 1.0, 1.5)
DEFAULT_GENERATION_STEP = Fraction(1, 65)

# (band start, band end, divisor of h) for the adaptive mesh
ADAPTIVE_BANDS = (
    (Fraction(0), Fraction(1, 16), 16),
    (Fraction(1, 16), Fraction(1, 8), 8),
    (Fraction(1, 8), Fraction(1, 4), 4),
    (Fraction(1, 4), Fraction(1, 2), 2),
    (Fraction(1, 2), Fraction(1), 1),
)

UNIFORM_SPACING_TOLERANCE = 1e-12
NODE_MATCH_TOLERANCE = 1e-12
DENSE_EIGEN_LIMIT = 64

OSCILLATION_FRACTION = 0.25
OSCILLATION_RELATIVE_TOLERANCE = 1e-8

FD_RELATIVE_STEP = 1e-6
GRADCHECK_THRESHOLD = 1e-4
# Gradient components below this fraction of the largest are compared against it
DISCREPANCY_FLOOR = 1e-3

NCG_GRADIENT_TOLERANCE = 1e-8
DEFAULT_GRADIENT_TOLERANCE = 1e-6
WOLFE_C1 = 1e-4
WOLFE_C2 = 0.9
RESTART_FACTOR = 5

# Reference L-infinity relative errors of the forward convergence study
# (Te = 150, dt = h^2, reference h = 1/256, common nodes of h = 1/16).
REFERENCE_RELATIVE_ERRORS = {
    "case1": {
        1.0: {16: 4.06128811e-2, 32: 1.84383487e-2, 64: 7.79639638e-3, 128: 2.58152757e-3},
        50.0: {16: 7.13364341e-1, 32: 1.18943460e-1, 64: 4.32772751e-2, 128: 1.33632000e-2},
        100.0: {16: 6.50940351e-1, 32: 7.78525433e-2, 64: 3.61940147e-3, 128: 1.91910503e-3},
        150.0: {16: 5.34453174e-1, 32: 1.89839760e-1, 64: 7.98713260e-4, 128: 5.17703968e-5},
    },
    "case2b": {
        1.0: {16: 3.99348343e-2, 32: 1.82818228e-2, 64: 7.76166615e-3, 128: 2.57518799e-3},
        50.0: {16: 7.08314789e-1, 32: 1.24252658e-1, 64: 4.48872766e-2, 128: 1.38375182e-2},
        100.0: {16: 6.49110544e-1, 32: 6.99036637e-2, 64: 4.32587167e-3, 128: 2.11319091e-3},
        150.0: {16: 5.33649320e-1, 32: 1.82694037e-1, 64: 8.23105779e-4, 128: 7.87715446e-5},
    },
}
