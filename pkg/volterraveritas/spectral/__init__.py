from volterraveritas.spectral.spectral_operator import BoundaryKind, StateVector, SpectralOperator, \
    miyadera_resolvent_bound
