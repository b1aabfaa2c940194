"""Fixed designs, coverage experiments and rate diagnostics."""

from .designs import KINDS, DesignSpec, draw_beta0, draw_response, make_design, target_gram
from .experiment import SimConfig, SimReport, SimulationError, run_experiment
from .posi_max import enumerated_max_draws, k0_ratio, structured_max_draws
from .rates import rate_scan, write_rates_csv
from .report import REPORT_COLUMNS, read_rows, report_csv
