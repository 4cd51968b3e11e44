"""Brownian couplings, Kato-class certificates and Feynman-Kac Monte Carlo
for Schrodinger-semigroup smoothing bounds on explicit model spaces."""

__version__ = "0.1.0"

from .spaces import StateSpace, euclidean, sphere2  # noqa: F401
from .paths import PathSkeleton, sample_path, refine_bridge, holder_modulus  # noqa: F401
from .coupling import (  # noqa: F401
    CouplingRun,
    reflect_couple,
    synchronous_couple,
    total_variation_gaussian,
    check_maximality,
    check_equivalence_ladder,
)
from .potentials import (  # noqa: F401
    Potential,
    CoulombPotential,
    MolecularPotential,
    KatoCertificate,
    smoothed_coulomb,
    kato_integral,
    classify_kato,
    extend_small_time,
    lq_kato_bound,
    submersion_project,
    load_molecule,
)
from .feynman_kac import (  # noqa: F401
    SemigroupEstimate,
    KhashminskiiCertificate,
    fk_evaluate,
    khashminskii_certify,
    truncation_ladder,
    duhamel_residual,
)
from .bounds import (  # noqa: F401
    f_K,
    lipschitz_quotient,
    holder_quotient,
    C_constant,
    A_constant,
    verify_main_theorem,
    corollary_B_constant,
    molecular_bound,
)
from .reports import BoundReport  # noqa: F401
