"""Central actions, their composition and midpoint-centered flows on the
plane, torus, sphere and hyperbolic plane."""

__version__ = "0.1.0"

from .spaces import HYPERBOLIC, PLANE, SPHERE, TORUS, get_space, hamiltonian_vector_field  # noqa: E402
from .central import (CentralAction, as_action, caustic_indicators, central_map, constant_action,  # noqa: E402
                      forward_map, generated_pair)
from .actions import (FlatQuadratic, FlatTranslation, HyperbolicIdealTranslation,  # noqa: E402
                      HyperbolicRotation, SphereRotation, exact_transform, make_action)
from .areas import quad_area, triangle_area, triangle_vertices, vertex_polygon_area  # noqa: E402
from .compose import compose2, compose_chain, composed_action  # noqa: E402
from .evolve import (Hamiltonian, action_of_flow, flow_action_provider, flow_derivative, hj_residual,  # noqa: E402
                     integrate_flow, midpoint_step, poisson_bracket)
from .expr import Expression  # noqa: E402

__all__ = [
    "HYPERBOLIC", "PLANE", "SPHERE", "TORUS", "get_space", "hamiltonian_vector_field",
    "CentralAction", "as_action", "caustic_indicators", "central_map", "constant_action",
    "forward_map", "generated_pair",
    "FlatQuadratic", "FlatTranslation", "HyperbolicIdealTranslation", "HyperbolicRotation",
    "SphereRotation", "exact_transform", "make_action",
    "quad_area", "triangle_area", "triangle_vertices", "vertex_polygon_area",
    "compose2", "compose_chain", "composed_action",
    "Hamiltonian", "action_of_flow", "flow_action_provider", "flow_derivative", "hj_residual", "integrate_flow",
    "midpoint_step", "poisson_bracket", "Expression",
]
