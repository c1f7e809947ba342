import math
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from solver.diagnostics import (
    DiagnosticsRecord,
    decay_exponent_fit,
    dissipative_monotonicity_check,
    gradient_energy_constant,
    monotonicity_check_E_eta,
    tau_energy_identity,
    tau_lp_decay_check,
    velocity_energy_balance,
    velocity_l2_bound_check,
)
from solver.errors import FitError, SolverError
from solver.model import ModelParams

logger = logging.getLogger(__name__)

DEFAULT_ETA = 0.125


def _float(value: Any) -> float:
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return math.inf
    return float(value)


class ControllerAgent:
    """
    Evaluates each selected check on a diagnostics history.
    Returns one result dict per check:
    {'id', 'description', 'metric', 'target', 'observed', 'r_squared', 'error', 'insufficient'}.
    """
    def __init__(self):
        self.metrics: Dict[str, Callable[..., Tuple[float, Optional[float]]]] = {
            "tau_energy_identity": self._tau_energy_identity,
            "tau_lp_decay": self._tau_lp_decay,
            "velocity_energy_balance": self._velocity_energy_balance,
            "velocity_l2_bound": self._velocity_l2_bound,
            "monotone_energy": self._monotone_energy,
            "dissipative_monotone_energy": self._dissipative_monotone_energy,
            "decay_exponent": self._decay_exponent,
            "gradient_energy_constant": self._gradient_energy_constant,
            "max_column": self._max_column,
            "min_column": self._min_column,
            "final_column": self._final_column,
        }
        logger.info("ControllerAgent initialized.")

    # --- Metrics: each returns (observed, r_squared or None) ---

    def _tau_energy_identity(self, history, params, options, fit_window):
        return tau_energy_identity(history, params), None

    def _tau_lp_decay(self, history, params, options, fit_window):
        p_list = [_float(p) for p in options.get("p_list", [2, 4, "inf"])]
        return tau_lp_decay_check(history, params, p_list), None

    def _velocity_energy_balance(self, history, params, options, fit_window):
        return velocity_energy_balance(history, params), None

    def _velocity_l2_bound(self, history, params, options, fit_window):
        return velocity_l2_bound_check(history), None

    def _eta(self, history: Sequence[DiagnosticsRecord], options: Dict[str, Any]) -> float:
        if "eta" in options:
            return float(options["eta"])
        return history[0].eta if history and history[0].eta > 0 else DEFAULT_ETA

    def _monotone_energy(self, history, params, options, fit_window):
        return monotonicity_check_E_eta(history, params, self._eta(history, options)), None

    def _dissipative_monotone_energy(self, history, params, options, fit_window):
        return dissipative_monotonicity_check(history, params, self._eta(history, options)), None

    def _decay_exponent(self, history, params, options, fit_window):
        quantity = options.get("quantity", "l2_pair")
        window = options.get("window")
        if fit_window is not None:
            window = fit_window
        if window is None:
            window = (history[0].t, history[-1].t) if history else (0.0, 0.0)
        fit = decay_exponent_fit(history, quantity, (float(window[0]), float(window[1])))
        return fit.exponent, fit.r_squared

    def _gradient_energy_constant(self, history, params, options, fit_window):
        return gradient_energy_constant(history), None

    def _column_values(self, history, options) -> List[float]:
        column = options.get("column")
        if not column:
            raise ValueError("params.column is required")
        values = [rec.column(column) for rec in history]
        values = [v for v in values if v is not None]
        if not values:
            raise FitError(f"column '{column}' holds no values")
        if options.get("absolute", False):
            values = [abs(v) for v in values]
        return values

    def _max_column(self, history, params, options, fit_window):
        return max(self._column_values(history, options)), None

    def _min_column(self, history, params, options, fit_window):
        return min(self._column_values(history, options)), None

    def _final_column(self, history, params, options, fit_window):
        return self._column_values(history, options)[-1], None

    # --- Driver ---

    def _target(self, check: Dict[str, Any]) -> str:
        if "bounds" in check:
            low, high = check["bounds"]
            target = f"in [{low}, {high}]"
        else:
            target = f"<= {check.get('tolerance')}"
        if check.get("min_r2") is not None:
            target += f", r^2 >= {check['min_r2']}"
        return target

    def run(self, history: Sequence[DiagnosticsRecord], params: ModelParams,
            checks: List[Dict[str, Any]], fit_window: Optional[Tuple[float, float]] = None) -> List[Dict[str, Any]]:
        """
        Applies every check definition to the history.
        Solver errors are captured per check; one failing check never stops the others.
        """
        logger.info(f"Applying {len(checks)} checks to a history of {len(history)} records.")
        detailed_results = []
        for check in checks:
            check_id = check.get("check_id", "UnknownID")
            result: Dict[str, Any] = {
                'id': check_id,
                'description': check.get("description", "N/A"),
                'metric': check.get("metric"),
                'target': self._target(check),
                'tolerance': check.get("tolerance"),
                'bounds': check.get("bounds"),
                'min_r2': check.get("min_r2"),
                'observed': None,
                'r_squared': None,
                'error': None,
                'insufficient': None,
            }
            metric = self.metrics.get(check.get("metric"))
            try:
                if metric is None:
                    raise ValueError(f"unknown metric '{check.get('metric')}'")
                if not history:
                    raise FitError("the diagnostics history is empty")
                observed, r_squared = metric(history, params, check.get("params", {}), fit_window)
                result['observed'] = float(observed)
                result['r_squared'] = r_squared
                logger.info(f"Check '{check_id}': observed {observed:.6g} (target {result['target']})")
            except FitError as e:
                logger.warning(f"Check '{check_id}' has insufficient signal: {e}")
                result['insufficient'] = str(e)
            except (SolverError, ValueError, KeyError, TypeError) as e:
                logger.error(f"Check '{check_id}' could not be evaluated: {e}", exc_info=True)
                result['error'] = str(e)
            detailed_results.append(result)
        return detailed_results
