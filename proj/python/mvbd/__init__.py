"""McKean-Vlasov birth-death processes: solvers, particle simulation and estimate checks."""

from ._mvbd import (
    Distribution,
    Error,
    RateModel,
    Report,
    __version__,
    affine,
    chaos,
    contraction,
    direct,
    dyadic,
    immigration_death,
    logistic,
    picard,
    run,
    simulate_particles,
    stationary,
    time_modulated,
    total_variation,
    transport_lp_oracle,
    w1,
    wp,
)

__all__ = [
    "Distribution",
    "Error",
    "RateModel",
    "Report",
    "__version__",
    "affine",
    "chaos",
    "contraction",
    "direct",
    "dyadic",
    "immigration_death",
    "logistic",
    "picard",
    "run",
    "simulate_particles",
    "stationary",
    "time_modulated",
    "total_variation",
    "transport_lp_oracle",
    "w1",
    "wp",
]
