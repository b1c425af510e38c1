"""Sign- and ranking-restricted structural VARs with a permutation/sign-switch accept-reject sampler."""

__version__ = "0.1.0"

from .var import (  # noqa: E402
    DgpSpec,
    IrfTensor,
    VarParams,
    companion_spectral_radius,
    compute_irf,
    simulate_dgp,
)
from .restrictions import (  # noqa: E402
    AssumptionReport,
    CandidateTable,
    Match,
    Restriction,
    RestrictionError,
    RestrictionSet,
    build_candidate_table,
    check_assumptions,
    check_cross_shock,
    check_dynamic,
    column_satisfies,
    load_restrictions,
    parse_restrictions,
    serialize_restrictions,
)
from .posterior import (  # noqa: E402
    Minnesota,
    NiwPosterior,
    cholesky_lower,
    fit_posterior,
    sample_posterior,
)
from .sampling import (  # noqa: E402
    AdmissibleDraw,
    DrawStats,
    Exhausted,
    Sampler,
    a0_mode_draw,
    algorithm1_draw,
    draw_many,
    fallback_enumeration_draw,
    rwz_draw,
    sample_haar,
)
