"""Kernels with generalized vanishing moments and the Taylorlet transform.

Modules:

- :mod:`taylorlab.qcalc`: q-analogs, q-Pochhammer symbols, Euler's function
- :mod:`taylorlab.kernel`: moment kernels, root composition, partial-moment tables
- :mod:`taylorlab.quad`: adaptive Gauss-Kronrod quadrature
- :mod:`taylorlab.transform`: Taylorlet transform of boundary-curve signals
- :mod:`taylorlab.detect`: maxima tracking and Taylor-coefficient detection
"""

from .qcalc import (euler_phi, euler_phi_error_bound, pentagonal_partial_sum,
                    q_binomial, q_bracket, q_derivative, q_factorial,
                    q_pochhammer, q_pochhammer_expand)
from .quad import QuadResult, QuadratureError, integrate
from .kernel import (GTable, KernelSpec, MomentKernel, RootKernel,
                     TaylorletKernel, build_bump, compose_root, explicit_phi_n,
                     explicit_psi, reference_taylorlet, recurse, restrictive_g,
                     tabulate_G)
from .transform import (ShearPoint, SignalModel, TaylorletSpec, TransformField,
                        builtin_signal, expression_signal, scale_axis,
                        transform_grid, transform_point)
from .detect import (CoefficientReport, DecayEstimate, DetectionError,
                     MaximaPath, detect_coefficients, estimate_decay,
                     find_maxima, normalize_per_scale, track_paths)

__version__ = "0.1.0"
