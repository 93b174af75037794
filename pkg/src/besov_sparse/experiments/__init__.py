"""Quantitative reproductions: mixing lemma, dome counterexample, mollified logarithm."""
from .counterexample import (CounterexampleRow, build_dome_lightning_rod, counterexample_report, counterexample_row,
                             dome_profile)
from .mixing import (Calibration, LemmaVerdict, MixingParams, build_cutoff, bump_margin, calibrate_cstar,
                     cutoff_profile, engineered_violation, lemma_terms, mixing_constant, pure_ring_modes,
                     verify_mixing_lemma)
from .mollified import MollifiedRow, build_mollified_log, linear_fit_r2, mollified_log_report
