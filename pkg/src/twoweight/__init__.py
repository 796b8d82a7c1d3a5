"""Two-weight inequalities for the vector-valued positive operator on finite lattices."""

from .lattice import (
    Instance,
    InstanceFormatError,
    Lattice,
    cell_mass,
    cells_within,
    deserialize,
    random_instance,
    serialize,
    validate,
)
from .operators import (
    apply_scalar,
    average,
    cell_averages,
    lp_norm,
    maximal,
    mixed_norm_of_Talpha,
    reduced_scalar_value,
    vector_entry,
)
from .testing import (
    norm_ascent,
    norm_exact_p2q2,
    scalar_testing,
    testing_c1,
    testing_c2,
    testing_report,
    verdict,
)

__version__ = "0.1.0"

__all__ = [
    "Instance",
    "InstanceFormatError",
    "Lattice",
    "cell_mass",
    "cells_within",
    "deserialize",
    "random_instance",
    "serialize",
    "validate",
    "apply_scalar",
    "average",
    "cell_averages",
    "lp_norm",
    "maximal",
    "mixed_norm_of_Talpha",
    "reduced_scalar_value",
    "vector_entry",
    "norm_ascent",
    "norm_exact_p2q2",
    "scalar_testing",
    "testing_c1",
    "testing_c2",
    "testing_report",
    "verdict",
]
