"""Frozen reference values.

Computed once with mpmath (entropy values) and with a standalone brute-force
model (dense Kronecker products, Heisenberg projectors built from the
rotation chain) that shares no code with the package.
"""

import numpy as np

F_HALF = 0.56233514461880835
TWO_F_ROOT_HALF = 0.8329910613993749
# k=1, v.u1 = 0.5, omega = pi/4
K1_QUARTER = 0.81238725393148027


def polar(a):
    return np.array([np.sin(a), 0.0, np.cos(a)])


# v, u1, u2 at pairwise angles 0.4, 0.9, 1.3 rad.
ANGLE_V = polar(0.0)
ANGLE_U = (polar(0.4), polar(1.3))
# Two-time Schmidt set at t=0.5, s=1.5, histories ordered ++, +-, -+, --.
ANGLE_PAIR_D = np.array(
    [
        [8.5243559439624950e-01, 0.0, 1.4234044672416395e-02, 0.0],
        [0.0, 1.2823494696674870e-01, 0.0, -1.4234044672416417e-02],
        [1.4234044672416395e-02, 0.0, 2.5275686366257183e-03, 0.0],
        [0.0, -1.4234044672416417e-02, 0.0, 1.6801890000376005e-02],
    ]
)
# Same config, projections at {1, 2}: p(+,+).
P_PP_12 = 0.7788029143827574

# eps-regime, n=3, k=2, eps=1e-3, coplanar chain; E_m at the optimal interior time.
EPS_E = (0.00464799954283547, 1.3895945205954525, 0.7020950063116422)
