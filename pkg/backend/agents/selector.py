import os
import json
import logging
from typing import Dict, Any, Optional, List

logger = logging.getLogger(__name__)

# Keys every check definition must carry
REQUIRED_CHECK_KEYS = ["check_id", "description", "metric"]
KNOWN_METRICS = [
    "tau_energy_identity",
    "tau_lp_decay",
    "velocity_energy_balance",
    "velocity_l2_bound",
    "monotone_energy",
    "dissipative_monotone_energy",
    "decay_exponent",
    "gradient_energy_constant",
    "max_column",
    "min_column",
    "final_column",
]


class SelectorAgent:
    """
    Selects the check definitions (JSON files) of a check category.
    Definitions that fail validation are skipped with a warning.
    """
    def __init__(self, checks_dir: Optional[str] = None):
        self.checks_dir = checks_dir or os.getenv("CHECKS_DIR", "checks")
        logger.info(f"SelectorAgent initialized. Using checks directory: {self.checks_dir}")

    def validate_check(self, data: Dict[str, Any], source: str = "<check>") -> bool:
        """Checks required keys, the metric name and the pass criterion of one definition."""
        missing_keys = [key for key in REQUIRED_CHECK_KEYS if key not in data]
        if missing_keys:
            logger.warning(f"Invalid check file: {source}. Missing required keys: {missing_keys}")
            return False
        if data["metric"] not in KNOWN_METRICS:
            logger.warning(f"Invalid check file: {source}. Unknown metric '{data['metric']}'")
            return False
        if ("tolerance" in data) == ("bounds" in data):
            logger.warning(f"Invalid check file: {source}. Exactly one of 'tolerance' or 'bounds' is required.")
            return False
        if "tolerance" in data and not isinstance(data["tolerance"], (int, float)):
            logger.warning(f"Invalid check file: {source}. 'tolerance' must be a number.")
            return False
        bounds = data.get("bounds")
        if bounds is not None and (
            not isinstance(bounds, list) or len(bounds) != 2
            or not all(isinstance(b, (int, float)) for b in bounds) or bounds[0] > bounds[1]
        ):
            logger.warning(f"Invalid check file: {source}. 'bounds' must be [low, high] with low <= high.")
            return False
        if not isinstance(data.get("params", {}), dict):
            logger.warning(f"Invalid check file: {source}. 'params' must be an object.")
            return False
        return True

    def _load_check_file(self, file_path: str) -> Optional[Dict[str, Any]]:
        try:
            with open(file_path, 'r', encoding='utf-8') as f:
                data: Dict[str, Any] = json.load(f)
        except json.JSONDecodeError:
            logger.warning(f"Invalid JSON format in check file: {file_path}")
            return None
        except Exception as e:
            logger.error(f"Error reading check file {file_path}: {e}", exc_info=True)
            return None
        if not isinstance(data, dict) or not self.validate_check(data, file_path):
            return None
        data.setdefault("params", {})
        data["source"] = file_path
        return data

    def run(self, category: str) -> List[Dict[str, Any]]:
        """
        Loads and validates the JSON check definitions in the category directory.
        Returns the valid definitions sorted by file name.
        """
        logger.info(f"Looking for checks in category '{category}'...")
        category_path = os.path.join(self.checks_dir, category)

        if not os.path.isdir(category_path):
            logger.warning(f"Category directory not found: {category_path}")
            return []

        checks = []
        try:
            for filename in sorted(os.listdir(category_path)):
                if filename.lower().endswith('.json'):
                    check = self._load_check_file(os.path.join(category_path, filename))
                    if check is not None:
                        checks.append(check)
        except Exception as e:
            logger.error(f"Error accessing checks directory {category_path}: {e}", exc_info=True)
            return []

        logger.info(f"Found {len(checks)} valid checks in '{category}'.")
        return checks
