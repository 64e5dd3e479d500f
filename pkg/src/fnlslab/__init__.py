"""Spectral laboratory for the cubic fractional NLS on the one-dimensional torus.

Submodules:
    spectral   fields, norms, FFT cubic nonlinearity
    resonance  phase/weight combinatorics and lattice-scan certificates
    dynamics   truncated gauged flow, gauge maps, conservation diagnostics
    energy     normal-form correction, modified energy, derivative split
    measure    Gaussian ensembles, weighted densities, transport experiments
    cli        batch front end (verify / simulate / energy / measure / report)
"""

from .spectral import (
    SpectralField,
    sobolev_norm,
    fourier_lebesgue_norm,
    physical_lp,
    cubic_term,
    gn_ratio,
)
from .resonance import (
    FrequencyQuad,
    BoundReport,
    phase,
    psi,
    multiplier,
    enumerate_hyperplane,
    visit_hyperplane,
    verify_phase_lower_bound,
    verify_dmvt_bound,
    divisor_count,
    factor_pairs,
    varphi_beta,
)
from .dynamics import (
    SimParams,
    Trajectory,
    linear_propagator,
    gauge_forward,
    gauge_inverse,
    rhs_gauged,
    rhs_interaction,
    evolve,
    flow,
    conservation_report,
    suggested_dt,
)
from .energy import (
    EnergyReport,
    DerivativeTerms,
    correction_R,
    energy_E,
    derivative_terms,
    energy_ratio_strong,
    energy_ratio_weak,
)
from .measure import (
    Ensemble,
    DensityValue,
    sample_mu,
    density_F,
    lp_moment,
    r_convergence,
    flow_jacobian_det,
    pushforward_check,
    gauge_invariance_check,
)

__version__ = "0.1.0"
