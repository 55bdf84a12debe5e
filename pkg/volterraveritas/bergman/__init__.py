from volterraveritas.bergman.bergman_space import SectorSpec, Lemma4Params, ShiftedKernel, EmbeddingCheck, \
    bergman_norm, bergman_norm_with_error, bergman_norm_closed_form, lemma4_constant, choose_exponent, \
    translation_apply, embedding_check, time_exponent_constant, default_proof_angle, DEFAULT_PROXY_ANGLE, \
    INEQUALITY_SLACK
