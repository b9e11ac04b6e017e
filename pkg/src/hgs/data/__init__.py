from .dataset import Dataset, Standardizer
from .events import (EventStream, carb_integral, carb_rate, discretize, insulin_integral, insulin_rate, merge_bolus,
                     series_to_dataset, window_mean)
from .synthetic import ALIGNMENTS, cases_to_dataset, gen_synthetic, synthetic_cases, synthetic_input_names
from .uva_sim import uva_cohort

__all__ = ["ALIGNMENTS", "Dataset", "EventStream", "Standardizer", "carb_integral", "carb_rate", "cases_to_dataset",
           "discretize", "gen_synthetic", "insulin_integral", "insulin_rate", "merge_bolus", "series_to_dataset",
           "synthetic_cases", "synthetic_input_names", "uva_cohort", "window_mean"]
