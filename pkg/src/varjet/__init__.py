"""Variational calculus on jet bundles.

Symbolic derivation of field equations from first- and second-order
Lagrangian densities, linearized (perturbation) equations with the tangency
guarantee that perturbation flows drag solutions into solutions, second
variations with trial-based stability verdicts, and the Riemannian geodesic
specialization with conjugate-point detection.
"""

from .expr import (
    DomainError,
    Expr,
    ExprError,
    UnboundSymbolError,
    add,
    call,
    cos,
    diff,
    evaluate,
    exp,
    free_symbols,
    is_zero,
    log,
    mul,
    num,
    pow_,
    simplify,
    sin,
    sqrt,
    substitute,
    sym,
    to_sexpr,
)
from .charts import (
    ChartError,
    JetChart,
    SectionSamples,
    composite_extend,
    composite_section_map,
    make_chart,
    numeric_jet,
    prolong_vertical_field,
    total_derivative,
)
from .variation import (
    EulerLagrangeForm,
    FiberedDiffeo,
    Lagrangian,
    Momenta,
    boundary_form,
    chart_change_check,
    euler_lagrange,
    first_variation,
    momenta,
    residual,
)
from .linearize import (
    JacobiEquations,
    JacobiLagrangian,
    first_order_linearization,
    jacobi_equations,
    jacobi_lagrangian,
    restrict_to_base_perturbation,
    tangency_defect,
)
from .stability import (
    EndpointError,
    HessianForm,
    SecondVariation,
    TrialDeformation,
    hessian,
    second_variation,
    stability_integral,
    stability_verdict,
    third_order_coefficients,
)
from .geometry import (
    CurvatureData,
    MetricChart,
    christoffel,
    curvature_velocity_block,
    eigen2x2_symmetric,
    flat_metric,
    geodesic_jacobi_equation,
    geodesic_lagrangian,
    metric_catalog,
    metric_chart,
    negative_eigenvector,
    riemann,
    sphere_stereographic,
)
from .integrate import (
    OdeSystem,
    Trajectory,
    conjugate_point_scan,
    drag_and_verify,
    energy_drift,
    fd_gradient_check,
    geodesic_system,
    geodesic_trajectory,
    ode_system,
    rk4,
    simpson,
    trajectory_section,
)
from .parsing import (
    ExprParseError,
    ProblemSpec,
    SpecFileError,
    parse_expression,
    parse_problem_file,
    parse_problem_text,
)

__version__ = "0.1.0"
