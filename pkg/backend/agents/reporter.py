import os
import datetime
import logging
from typing import List, Dict, Any, Optional

from agents.grader import ERROR, FAIL, INSUFFICIENT_SIGNAL, PASS

logger = logging.getLogger(__name__)


def _fmt(value: Any) -> str:
    if value is None:
        return "N/A"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class ReporterAgent:
    """
    Writes the summary report of a run: a human-readable text file with a
    pass/fail summary and one block per check, plus a key/value file with the
    same content for scripts.
    """
    def __init__(self, report_dir: Optional[str] = None):
        self.report_dir = report_dir or os.getenv("REPORTS_DIR", "reports")
        logger.info(f"ReporterAgent initialized. Using report directory: {self.report_dir}")
        try:
            os.makedirs(self.report_dir, exist_ok=True)
        except OSError as e:
            logger.error(f"Failed to create report directory {self.report_dir}: {e}", exc_info=True)

    def _calculate_summary(self, results: List[Dict[str, Any]]) -> Dict[str, int]:
        counts = {PASS: 0, FAIL: 0, INSUFFICIENT_SIGNAL: 0, ERROR: 0}
        for item in results:
            verdict = item.get('verdict', ERROR)
            counts[verdict] = counts.get(verdict, 0) + 1
        return counts

    def _status(self, counts: Dict[str, int], total: int, is_failure: bool) -> str:
        if is_failure:
            return "PROCESS FAILED"
        if total == 0:
            return "NO CHECKS"
        failed = counts[FAIL] + counts[ERROR]
        return "PASSED" if failed == 0 else f"FAILED ({failed} issues)"

    def _write_key_values(self, path: str, status: str, counts: Dict[str, int], total: int,
                          results: List[Dict[str, Any]], context: Dict[str, Any]) -> None:
        lines = [f"status = {status}", f"checks.total = {total}"]
        lines += [f"checks.{verdict.lower().replace(' ', '_')} = {counts[verdict]}" for verdict in counts]
        for key, value in context.items():
            lines.append(f"run.{key} = {value!r}" if isinstance(value, float) else f"run.{key} = {value}")
        for item in results:
            prefix = f"check.{item.get('id', 'UnknownID')}"
            lines.append(f"{prefix}.verdict = {item.get('verdict', ERROR)}")
            lines.append(f"{prefix}.metric = {item.get('metric')}")
            lines.append(f"{prefix}.target = {item.get('target')}")
            if item.get('observed') is not None:
                lines.append(f"{prefix}.observed = {item['observed']!r}")
            if item.get('r_squared') is not None:
                lines.append(f"{prefix}.r_squared = {item['r_squared']!r}")
            note = item.get('error') or item.get('insufficient')
            if note:
                lines.append(f"{prefix}.note = {note}")
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write("\n".join(lines) + "\n")

    def run(self, source_path: str, detailed_results: List[Dict[str, Any]],
            is_failure: bool = False, context: Optional[Dict[str, Any]] = None) -> str:
        """
        Generates the report files and returns the path of the text report, or an empty string on failure.
        ``context`` carries run facts (category, final time, blow-up time, ...) shown in the header.
        """
        logger.info("Generating report...")
        context = context or {}
        timestamp = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        base_name = os.path.splitext(os.path.basename(source_path))[0] or "run"
        report_prefix = "FAILURE_report" if is_failure else "report"
        report_path = os.path.join(self.report_dir, f"{report_prefix}_{base_name}_{timestamp}.txt")
        kv_path = os.path.splitext(report_path)[0] + ".kv"

        counts = self._calculate_summary(detailed_results)
        total = len(detailed_results)
        status = self._status(counts, total, is_failure)

        try:
            with open(report_path, 'w', encoding='utf-8', newline='\n') as f:
                f.write("--- Experiment Report ---\n\n")
                f.write(f"Source: {source_path}\n")
                f.write(f"Report Generated: {datetime.datetime.now().isoformat()}\n")
                for key, value in context.items():
                    f.write(f"{key.replace('_', ' ').capitalize()}: {_fmt(value)}\n")

                f.write("\n--- Summary ---\n")
                f.write(f"Status: {status}\n")
                f.write(f"Checks Run: {total}\n")
                f.write(f"Checks Passed: {counts[PASS]} / {total}\n")
                f.write(f"Checks Failed: {counts[FAIL] + counts[ERROR]} / {total}\n")
                if counts[INSUFFICIENT_SIGNAL]:
                    f.write(f"Insufficient Signal: {counts[INSUFFICIENT_SIGNAL]} / {total}\n")

                f.write("\n--- Detailed Results ---\n")
                if not detailed_results:
                    f.write(f"Failure Reason: {context.get('failure_reason', 'N/A')}\n" if is_failure
                            else "(No check results to display)\n")
                for item in detailed_results:
                    verdict = item.get('verdict', ERROR)
                    emoji = "✅" if verdict == PASS else ("⚠️" if verdict == INSUFFICIENT_SIGNAL else "❌")
                    f.write(f"\n{emoji} Check ID: {item.get('id', 'UnknownID')}\n")
                    f.write(f"Verdict: {verdict}\n")
                    f.write(f"Description: {item.get('description', 'N/A')}\n")
                    f.write(f"Target: {item.get('target', 'N/A')}\n")
                    f.write(f"Observed: {_fmt(item.get('observed'))}\n")
                    if item.get('r_squared') is not None:
                        f.write(f"Fit r^2: {_fmt(item['r_squared'])}\n")
                    note = item.get('error') or item.get('insufficient')
                    if note:
                        f.write(f"Note: {note}\n")
                    f.write("-" * 30 + "\n")

                f.write("\n\n--- End of Report ---\n")

            self._write_key_values(kv_path, status, counts, total, detailed_results, context)
            logger.info(f"Report saved to {report_path}")
            return report_path

        except Exception as e:
            logger.error(f"Failed to write report {report_path}: {e}", exc_info=True)
            return ""


def read_key_values(path: str) -> Dict[str, str]:
    """Parses a key/value report back into a dict."""
    values: Dict[str, str] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if " = " in line:
                key, value = line.rstrip("\n").split(" = ", 1)
                values[key] = value
    return values
