"""caloric: global approximation of heat-equation solutions by pole sums.

Local caloric functions (solutions of d_t u = Lap u + c0 u on a spacetime
set) are approximated by finite sums of translated heat kernels whose poles
are swept out of the observation window, optionally repackaged as the heat
evolution of a smooth compactly supported initial datum, and then driven
through the application experiments: moving hot spots, prescribed isotherm
topology, and transfer to the flat torus.
"""

from caloric.kernels import (HeatKernelParams, KernelSum, heat_kernel,
                             heat_kernel_derivs, eval_kernel_sum,
                             verify_gaussian_bound, single_pole)
from caloric.geometry import (SpaceCurve, SpacetimeRegion, BallPrimitive,
                              BoxPrimitive, TubePrimitive, Exhaustion,
                              tube_around_curve, complement_slice_connected)
from caloric.fields import GridField, SpatialField

__version__ = "0.1.0"

__all__ = [
    "HeatKernelParams", "KernelSum", "heat_kernel", "heat_kernel_derivs",
    "eval_kernel_sum", "verify_gaussian_bound", "single_pole",
    "SpaceCurve", "SpacetimeRegion", "BallPrimitive", "BoxPrimitive",
    "TubePrimitive", "Exhaustion", "tube_around_curve",
    "complement_slice_connected", "GridField", "SpatialField",
    "__version__",
]
