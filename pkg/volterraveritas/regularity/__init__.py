from volterraveritas.regularity.admissibility import ObservationKind, ObservationOperator, AdmissibilityReport, \
    PerturbationProbe, PerturbationReport, admissibility_constant, perturbation_admissibility_bound
from volterraveritas.regularity.regularity import lp_time_norm, SampleNorms, sample_norms, RegularityReport, \
    ContractionConstants, contraction_constants, maxreg_verify, TraceBound, history_trace_bound
