import os
import csv
import logging
from typing import List, Optional, Tuple

from solver.diagnostics import CSV_COLUMNS, REQUIRED_COLUMNS, DiagnosticsRecord
from solver.errors import SchemaError

logger = logging.getLogger(__name__)

# (records or None, error message or None)
RunResult = Tuple[Optional[List[DiagnosticsRecord]], Optional[str]]


class ExtractorAgent:
    """
    Reads a diagnostics CSV, checks it against the time-series schema and
    rebuilds the DiagnosticsRecord history.
    """
    def __init__(self):
        logger.info("ExtractorAgent initialized.")

    def check_header(self, header: List[str], source: str) -> None:
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{source} lacks required columns {missing}")
        if header[:len(REQUIRED_COLUMNS)] != REQUIRED_COLUMNS:
            raise SchemaError(f"{source}: required columns are out of order")
        known = set(CSV_COLUMNS)
        extra = [c for c in header if c not in known]
        if extra:
            logger.warning(f"{source} carries columns this version does not read: {extra}")

    def read(self, csv_path: str) -> List[DiagnosticsRecord]:
        """Parses the CSV, raising SchemaError on any mismatch."""
        with open(csv_path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None:
                raise SchemaError(f"{csv_path} is empty")
            self.check_header(list(reader.fieldnames), csv_path)
            records = []
            for line_no, row in enumerate(reader, start=2):
                try:
                    records.append(DiagnosticsRecord.from_row(row))
                except SchemaError as e:
                    raise SchemaError(f"{csv_path}:{line_no}: {e}") from e
        times = [r.t for r in records]
        if any(b < a for a, b in zip(times, times[1:])):
            raise SchemaError(f"{csv_path}: record times are not nondecreasing")
        return records

    def run(self, csv_path: str) -> RunResult:
        """
        Returns (records, None) on success and (None, error message) when the file
        is missing or does not match the schema.
        """
        logger.info(f"Extracting diagnostics history from {csv_path}")
        if not os.path.isfile(csv_path):
            error_msg = f"Diagnostics file not found: {csv_path}"
            logger.error(error_msg)
            return None, error_msg
        try:
            records = self.read(csv_path)
        except SchemaError as e:
            logger.error(f"Schema mismatch in {csv_path}: {e}")
            return None, f"Schema mismatch: {e}"
        except Exception as e:
            logger.error(f"Failed to read {csv_path}: {e}", exc_info=True)
            return None, f"Failed to read {csv_path}: {e}"
        logger.info(f"Extracted {len(records)} records from {csv_path}")
        return records, None
