import csv
import logging
import os
import pathlib
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

from agents.controller import ControllerAgent
from agents.extractor import ExtractorAgent
from agents.grader import FAILING_VERDICTS, GraderAgent
from agents.reporter import ReporterAgent
from agents.selector import SelectorAgent
from experiments.config import RunConfig, echo_config, parse_config
from experiments.generators import generate_initial
from solver.diagnostics import CSV_COLUMNS, DiagnosticsConfig, DiagnosticsRecord, DiagnosticsTracker
from solver.errors import BlowUpError, ConfigError, ResolutionError, SolverError
from solver.integrator import run
from solver.model import ModelParams
from utils.field_io import write_state

logger = logging.getLogger(__name__)

# --- Configuration ---
DEFAULT_CHECK_SETS = "TAU_IDENTITY,EULER,ENERGY_CONSERVATION,MONOTONE_ENERGY,DECAY"
KNOWN_CHECK_SETS = [c.strip() for c in os.getenv("KNOWN_CHECK_SETS", DEFAULT_CHECK_SETS).split(',') if c.strip()]

logger.info(f"Orchestrator: Using known check sets: {KNOWN_CHECK_SETS}")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_CHECK_FAILED = 4

CONFIG_ECHO_NAME = "config_echo.cfg"
CSV_NAME = "diagnostics.csv"


class Outcome(NamedTuple):
    results: Optional[List[Dict[str, Any]]]
    report_path: Optional[str]
    exit_code: int


class OrchestratorAgent:
    """
    Runs an experiment end to end: config, initial data, time integration with
    diagnostics, artifacts on disk, then the check chain
    (selector -> controller -> grader -> reporter).
    """
    def __init__(self, checks_dir: Optional[str] = None, reports_dir: Optional[str] = None):
        logger.info("Initializing OrchestratorAgent...")
        self.extractor = ExtractorAgent()
        self.selector = SelectorAgent(checks_dir)
        self.controller = ControllerAgent()
        self.reporter = ReporterAgent(reports_dir)
        self.grader = GraderAgent()
        logger.info("OrchestratorAgent initialized with sub-agents.")

    def _determine_category_from_path(self, path: str) -> str:
        """Parent directory name first, then anywhere in the path. Empty string if nothing matches."""
        abs_path = pathlib.Path(path).resolve()
        parent_dir_name = abs_path.parent.name
        for category in KNOWN_CHECK_SETS:
            if parent_dir_name.lower() == category.lower():
                logger.info(f"Path Detection: Found check set '{category}' from parent directory.")
                return category
        normalized = str(abs_path).replace("\\", "/").lower()
        for category in KNOWN_CHECK_SETS:
            if f"/{category.lower()}/" in normalized:
                logger.info(f"Path Detection: Found check set '{category}' from full path.")
                return category
        logger.info(f"Path Detection: No check set found for path: {path}")
        return ""

    def _resolve_category(self, path: str, specified: Optional[str], configured: Optional[str]) -> str:
        for candidate, origin in ((specified, "specified"), (configured, "configured")):
            if candidate:
                if candidate.upper() in KNOWN_CHECK_SETS:
                    logger.info(f"Using {origin} check set '{candidate.upper()}'.")
                    return candidate.upper()
                logger.warning(f"{origin.capitalize()} check set '{candidate}' is not in known list {KNOWN_CHECK_SETS}.")
        return self._determine_category_from_path(path)

    def _check_chain(self, source: str, history: Sequence[DiagnosticsRecord], params: ModelParams,
                     category: str, reporter: ReporterAgent, context: Dict[str, Any],
                     fit_window: Optional[Tuple[float, float]] = None) -> Outcome:
        if not category:
            logger.warning(f"No check set determined for {source}; reporting without checks.")
            report_path = reporter.run(source, [], context=context)
            return Outcome([], report_path, EXIT_OK)

        logger.info(f"Running SelectorAgent for check set: {category}")
        checks = self.selector.run(category)
        if not checks:
            logger.warning(f"No valid checks found for check set '{category}'.")
            report_path = reporter.run(source, [], context=context)
            return Outcome([], report_path, EXIT_OK)

        logger.info(f"Running ControllerAgent with {len(checks)} checks")
        results = self.controller.run(history, params, checks, fit_window)
        logger.info(f"Running GraderAgent on {len(results)} results.")
        results = self.grader.run(results)
        failed = [r['id'] for r in results if r['verdict'] in FAILING_VERDICTS]
        exit_code = EXIT_CHECK_FAILED if failed else EXIT_OK
        if failed:
            logger.warning(f"Checks failed: {failed}")
        logger.info("Running ReporterAgent...")
        report_path = reporter.run(source, results, context=context)
        return Outcome(results, report_path, exit_code)

    def _fit_window(self, cfg: DiagnosticsConfig, history: Sequence[DiagnosticsRecord]) -> Optional[Tuple[float, float]]:
        if cfg.fit_window_start is None and cfg.fit_window_end is None:
            return None
        start = cfg.fit_window_start if cfg.fit_window_start is not None else history[0].t
        end = cfg.fit_window_end if cfg.fit_window_end is not None else history[-1].t
        return start, end

    def _failure(self, source: str, reason: str, exit_code: int, reporter: Optional[ReporterAgent] = None,
                 context: Optional[Dict[str, Any]] = None) -> Outcome:
        logger.error(reason)
        context = dict(context or {})
        context['failure_reason'] = reason
        report_path = (reporter or self.reporter).run(source, [], is_failure=True, context=context)
        logger.error(f"--- Run Failed. Report: {report_path} ---")
        return Outcome(None, report_path, exit_code)

    def _integrate(self, cfg: RunConfig, out_dir: str) -> List[DiagnosticsRecord]:
        """Integrates the configured run, writing the CSV row by row and the snapshots as they come."""
        initial = generate_initial(cfg.initial_data, cfg.grid, seed=cfg.outputs.seed)
        tracker = DiagnosticsTracker(cfg.model, cfg.diagnostics, hold_velocity=cfg.stepper.hold_velocity)
        csv_file = open(os.path.join(out_dir, CSV_NAME), 'w', encoding='utf-8', newline='') if cfg.outputs.csv else None
        try:
            writer = None
            if csv_file is not None:
                writer = csv.DictWriter(csv_file, fieldnames=CSV_COLUMNS, lineterminator="\n")
                writer.writeheader()
            events = run(initial, cfg.model, cfg.stepper, cfg.diagnostics.cadence, cfg.outputs.snapshot_times)
            for event in events:
                if event.is_record:
                    rec = tracker.observe(event.state)
                    if writer is not None:
                        writer.writerow(rec.to_row())
                        csv_file.flush()
                    logger.info(f"t={rec.t:.6g}: |u|={rec.l2_u:.4e}, |tau|={rec.l2_tau:.4e}")
                if event.is_snapshot:
                    path = os.path.join(out_dir, f"snapshot_{event.step_index:08d}.snap")
                    write_state(path, event.state)
                    logger.info(f"Snapshot at t={event.state.t:.6g} written to {path}")
        finally:
            if csv_file is not None:
                csv_file.close()
        return tracker.records

    def run_experiment(self, config_path: str, specified_category: Optional[str] = None,
                       output_dir: Optional[str] = None) -> Outcome:
        """Executes one configured experiment and returns (results, report path, exit code)."""
        logger.info(f"--- Starting Experiment: {config_path} ---")
        try:
            cfg = parse_config(config_path)
        except ConfigError as e:
            return self._failure(config_path, f"Configuration error: {e}", EXIT_CONFIG)

        out_dir = output_dir or cfg.outputs.directory
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, CONFIG_ECHO_NAME), 'w', encoding='utf-8', newline='\n') as f:
                f.write(echo_config(cfg))
        except OSError as e:
            return self._failure(config_path, f"Cannot write to output directory {out_dir}: {e}", EXIT_UNEXPECTED)
        reporter = ReporterAgent(out_dir)
        category = self._resolve_category(config_path, specified_category, cfg.outputs.check_set)
        context: Dict[str, Any] = {'category': category or "none", 'output_directory': out_dir}

        try:
            history = self._integrate(cfg, out_dir)
        except (ResolutionError, ConfigError) as e:
            return self._failure(config_path, f"Configuration error: {e}", EXIT_CONFIG, reporter, context)
        except BlowUpError as e:
            context['blowup_time'] = e.t
            if e.last_state is not None:
                write_state(os.path.join(out_dir, "blowup_last_state.snap"), e.last_state)
            return self._failure(config_path, f"Blow-up: {e}", EXIT_BLOWUP, reporter, context)
        except SolverError as e:
            return self._failure(config_path, f"Solver error: {e}", EXIT_UNEXPECTED, reporter, context)
        except Exception as e:
            logger.error(f"Unexpected error during integration: {e}", exc_info=True)
            return self._failure(config_path, f"Unexpected error: {e}", EXIT_UNEXPECTED, reporter, context)

        context['records'] = len(history)
        context['final_time'] = history[-1].t if history else 0.0
        outcome = self._check_chain(config_path, history, cfg.model, category, reporter, context,
                                    self._fit_window(cfg.diagnostics, history) if history else None)
        logger.info(f"--- Finished Experiment: {config_path}. Report: {outcome.report_path} (exit {outcome.exit_code}) ---")
        return outcome

    def summarize(self, csv_path: str, specified_category: Optional[str] = None,
                  config_path: Optional[str] = None) -> Outcome:
        """
        Re-runs the check chain on an existing diagnostics CSV.
        Model parameters come from ``config_path`` or the config echo next to the CSV.
        """
        logger.info(f"--- Starting Summary of: {csv_path} ---")
        config_path = config_path or os.path.join(os.path.dirname(os.path.abspath(csv_path)), CONFIG_ECHO_NAME)
        reporter = ReporterAgent(os.path.dirname(os.path.abspath(csv_path)))
        cfg: Optional[RunConfig] = None
        if os.path.isfile(config_path):
            try:
                cfg = parse_config(config_path)
            except ConfigError as e:
                return self._failure(csv_path, f"Configuration error in {config_path}: {e}", EXIT_CONFIG, reporter)
        else:
            logger.warning(f"No configuration found at {config_path}; using default model parameters.")

        history, error_msg = self.extractor.run(csv_path)
        if error_msg:
            return self._failure(csv_path, error_msg, EXIT_CONFIG, reporter)

        params = cfg.model if cfg else ModelParams()
        configured = cfg.outputs.check_set if cfg else None
        category = self._resolve_category(csv_path, specified_category, configured)
        context = {
            'category': category or "none",
            'records': len(history),
            'final_time': history[-1].t if history else 0.0,
        }
        fit_window = self._fit_window(cfg.diagnostics, history) if cfg and history else None
        outcome = self._check_chain(csv_path, history, params, category, reporter, context, fit_window)
        logger.info(f"--- Finished Summary of: {csv_path}. Report: {outcome.report_path} (exit {outcome.exit_code}) ---")
        return outcome
