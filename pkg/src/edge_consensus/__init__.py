"""Distributed consensus controller design through edge dynamics.

Typical use::

    from edge_consensus import (LtiModel, path_graph, compute_matrices, spectrum,
                                design_first_order, predicted_spectrum)

    model = LtiModel(A, B)
    mats = compute_matrices(path_graph(9))
    gain = design_first_order(model, q1_scalar=1.0, r1=[[100.0]], mu=0.01)
    report = predicted_spectrum(gain, spectrum(mats), model, mats.laplacian)
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .graph_algebra import (Graph, GraphMatrices, LaplacianSpectrum, build_graph,
                            compute_matrices, graph_from_dict, is_connected, path_graph,
                            spectrum)
from .linear_systems import (AssumptionReport, LtiModel, RiccatiSolution, check_assumptions,
                             eig, solve_care)
from .edge_dynamics import (EdgeDynamics, EdgeTransform, ReducedEdgeSystem,
                            build_edge_dynamics, build_transform, project_initial_state,
                            reduced_system)
from .synthesis import (ControllerGain, DesignMode, DesignSpec, ModeBasis, NuNormalization,
                        SpectrumReport, design, design_first_order, design_global,
                        design_local, design_reduced, optimal_cost, predicted_spectrum)
from .simulation import (DisagreementTrace, Trajectory, closed_loop_cost, disagreement,
                         integrate_cost, simulate_closed_loop)
