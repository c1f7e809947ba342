import math
import logging
from typing import List, Dict, Any

logger = logging.getLogger(__name__)

PASS = "PASS"
FAIL = "FAIL"
INSUFFICIENT_SIGNAL = "INSUFFICIENT SIGNAL"
ERROR = "ERROR"
# Verdicts that make a run fail
FAILING_VERDICTS = (FAIL, ERROR)


class GraderAgent:
    """
    Turns the observed value of each check into a verdict against its tolerance or bounds.
    """
    def __init__(self):
        logger.info("GraderAgent initialized.")

    def grade(self, item: Dict[str, Any]) -> str:
        if item.get('error'):
            return ERROR
        if item.get('insufficient'):
            return INSUFFICIENT_SIGNAL
        observed = item.get('observed')
        if observed is None or not math.isfinite(observed):
            logger.warning(f"Check '{item.get('id')}' observed a non-finite value: {observed}")
            return FAIL
        bounds = item.get('bounds')
        if bounds is not None:
            passed = bounds[0] <= observed <= bounds[1]
        else:
            passed = observed <= item.get('tolerance', 0.0)
        min_r2 = item.get('min_r2')
        if passed and min_r2 is not None:
            r_squared = item.get('r_squared')
            passed = r_squared is not None and r_squared >= min_r2
        return PASS if passed else FAIL

    def run(self, detailed_results: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
        """
        Adds a 'verdict' key to each result:
        PASS, FAIL, INSUFFICIENT SIGNAL (the check could not be computed from the data) or ERROR.
        """
        if not detailed_results:
            logger.warning("GraderAgent received empty list for grading. Returning empty.")
            return []

        logger.info(f"Grading {len(detailed_results)} results...")
        for item in detailed_results:
            item['verdict'] = self.grade(item)
            logger.info(f"Verdict for {item.get('id', 'UnknownID')}: {item['verdict']}")
        logger.info("Finished grading.")
        return detailed_results
