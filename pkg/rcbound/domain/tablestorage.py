# column names of the tables written by rcbound

## identity residuals (verify)
IDENTITY = "identity"
LHS = "lhs"
RHS = "rhs"
RESIDUAL = "residual"

## exponent sweeps (exponents)
RATE = "rate"
E_R = "E_r"
RHO_STAR_R = "rho_star_R"
RHO_BAR_STAR_R = "rho_bar_star_R"
E_SP = "E_SP"
SINGULAR_AT_RATE = "singular_at_rate"

## bounds (bound)
N = "N"
BOUND = "bound"
EXPONENT = "exponent"
PREFACTOR_POWER = "prefactor_power"

## concentration (concentration)
EXACT_TAIL = "exact_tail"
RATIO = "ratio"

## ensemble oracle (ensemble, regress)
M = "M"
P_E = "p_e"
CI = "ci"
METHOD = "method"
SLOPE = "slope"
STDERR = "stderr"
INTERCEPT = "intercept"
POINTS = "points"

## per type class breakdown
TYPE_CLASS = "type_class"
WEIGHT = "weight"
PAIRWISE_TAIL = "pairwise_tail"
CONTRIBUTION = "contribution"

## key/value reports (analyze)
QUANTITY = "quantity"
VALUE = "value"
