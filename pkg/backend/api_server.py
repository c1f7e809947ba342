import io
import os
import json
import logging
import pathlib
from datetime import datetime
from typing import Optional, List, Dict

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from dotenv import load_dotenv
load_dotenv()

from agents.orchestrator import EXIT_OK, EXIT_UNEXPECTED, OrchestratorAgent
from agents.grader import PASS
from solver.linear_analysis import dispersion_table

# --- Configuration ---
CONFIGS_DIR = os.getenv("CONFIGS_DIR", "configs")
CHECKS_DIR = os.getenv("CHECKS_DIR", "checks")
REPORTS_DIR = os.getenv("REPORTS_DIR", "reports")
MAX_DISPERSION_ROWS = 10000

API_LOG_LEVEL_STR = os.getenv('API_LOG_LEVEL', 'INFO').upper()
API_LOG_LEVEL = getattr(logging, API_LOG_LEVEL_STR, logging.INFO)

# --- Setup Logging ---
logging.basicConfig(
    level=API_LOG_LEVEL,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    force=True
)
logger = logging.getLogger(__name__)
logger.info(f"Logging configured at level: {logging.getLevelName(API_LOG_LEVEL)}")
logger.info(f"Configs: {CONFIGS_DIR}, checks: {CHECKS_DIR}, reports: {REPORTS_DIR}")


# --- Pydantic Models for Request/Response ---
class ExperimentRequest(BaseModel):
    config_path: str
    # Inferred from the config when not provided
    category: Optional[str] = None


class ExperimentResponse(BaseModel):
    success: bool
    message: str
    exit_code: int
    report_path: Optional[str] = None
    output_directory: Optional[str] = None
    logs: Optional[List[str]] = None
    summary: Optional[str] = None


class ConfigListResponse(BaseModel):
    configs: List[str]


class CheckDetail(BaseModel):
    id: str
    description: str
    metric: str
    file_path: str


class CheckListResponse(BaseModel):
    checks_by_category: Dict[str, List[CheckDetail]]


class DispersionRow(BaseModel):
    k: float
    re_lambda_plus: float
    im_lambda_plus: float
    re_lambda_minus: float
    im_lambda_minus: float


class DispersionResponse(BaseModel):
    alpha: float
    mu: float
    rows: List[DispersionRow]


# --- FastAPI App Initialization ---
app = FastAPI(
    title="Oldroyd-B Experiments API",
    description="API to launch solver experiments, browse check sets and read reports.",
    version="0.1.0"
)

origins = [
    "http://localhost:5173",
    "http://127.0.0.1:5173",
]

app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# --- Helper Functions ---
def is_safe_path(base_dir: str, requested_path_str: str) -> bool:
    """Check if the requested path exists and is within the base directory."""
    try:
        base_path = pathlib.Path(base_dir).resolve(strict=True)
        requested_path = pathlib.Path(requested_path_str).resolve(strict=True)
        return requested_path.is_relative_to(base_path)
    except FileNotFoundError:
        logger.debug(f"Path check: {requested_path_str} does not exist")
        return False
    except Exception as e:
        logger.warning(f"Path check failed for {requested_path_str}: {e}")
        return False


# --- API Endpoints ---
@app.get("/")
def read_root():
    """Root endpoint for basic API health check."""
    return {"message": "Oldroyd-B Experiments API is running."}


@app.get("/api/list-configs", response_model=ConfigListResponse)
def list_configs():
    """Lists run configurations (.cfg) recursively within CONFIGS_DIR."""
    base_path = pathlib.Path(CONFIGS_DIR)
    if not base_path.is_dir():
        logger.error(f"CONFIGS_DIR '{CONFIGS_DIR}' not found or is not a directory.")
        return ConfigListResponse(configs=[])
    configs = sorted(
        str(item) for item in base_path.rglob('*.cfg')
        if item.is_file() and not item.name.startswith('.')
    )
    logger.info(f"Found {len(configs)} configs in '{CONFIGS_DIR}'")
    return ConfigListResponse(configs=configs)


@app.get("/api/list-checks", response_model=CheckListResponse)
def list_checks():
    """Lists the check definitions of every category."""
    checks_by_category: Dict[str, List[CheckDetail]] = {}
    base_path = pathlib.Path(CHECKS_DIR)
    if not base_path.is_dir():
        logger.error(f"CHECKS_DIR '{CHECKS_DIR}' not found.")
        return CheckListResponse(checks_by_category={})

    for category_dir in sorted(base_path.iterdir()):
        if not category_dir.is_dir() or category_dir.name.startswith('.'):
            continue
        details = []
        for check_file in sorted(category_dir.glob('*.json')):
            try:
                with open(check_file, 'r', encoding='utf-8') as f:
                    data = json.load(f)
                details.append(CheckDetail(
                    id=data.get("check_id", check_file.stem),
                    description=data.get("description", "(No description)"),
                    metric=data.get("metric", "(No metric)"),
                    file_path=str(check_file),
                ))
            except json.JSONDecodeError:
                logger.warning(f"Skipping invalid JSON file: {check_file}")
            except Exception as e:
                logger.warning(f"Error reading check file {check_file}: {e}")
        checks_by_category[category_dir.name] = sorted(details, key=lambda d: d.id)
    logger.info(f"Found checks in {len(checks_by_category)} categories.")
    return CheckListResponse(checks_by_category=checks_by_category)


@app.get("/api/report-content", response_class=PlainTextResponse)
def get_report_content(report_path: str = Query(..., description="Path to a report file under REPORTS_DIR")):
    """Gets the content of a specific report file."""
    if not is_safe_path(REPORTS_DIR, report_path):
        logger.warning(f"Attempt to access report outside REPORTS_DIR: {report_path}")
        raise HTTPException(status_code=403, detail="Access denied: Report path is invalid or outside allowed directory.")
    try:
        content = pathlib.Path(report_path).read_text(encoding="utf-8")
        return PlainTextResponse(content=content)
    except Exception as e:
        logger.error(f"Failed to read report file {report_path}: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail="Failed to read report file.")


@app.get("/api/dispersion", response_model=DispersionResponse)
def get_dispersion(kmax: float = Query(..., gt=0), dk: float = Query(1.0, gt=0),
                   alpha: float = Query(2.0, gt=0), mu: float = Query(1.0, ge=0)):
    """Eigenvalues of the linearized single-mode system for k = dk, 2 dk, ..., kmax."""
    count = int(round(kmax / dk))
    if count > MAX_DISPERSION_ROWS:
        raise HTTPException(status_code=422, detail=f"Too many rows requested ({count} > {MAX_DISPERSION_ROWS}).")
    k_values = [dk * i for i in range(1, count + 1)]
    rows = [
        DispersionRow(k=k, re_lambda_plus=a, im_lambda_plus=b, re_lambda_minus=c, im_lambda_minus=d)
        for k, a, b, c, d in dispersion_table(k_values, coupling=0.5 * alpha, diffusivity=mu)
    ]
    return DispersionResponse(alpha=alpha, mu=mu, rows=rows)


@app.post("/api/run-experiment", response_model=ExperimentResponse)
def run_experiment_endpoint(request: ExperimentRequest):
    if not is_safe_path(CONFIGS_DIR, request.config_path):
        if not pathlib.Path(request.config_path).exists():
            raise HTTPException(status_code=404, detail=f"Config not found: {request.config_path}")
        raise HTTPException(status_code=403, detail="Access denied: Config path is outside the configs directory.")

    logger.info(f"Received run request for config: {request.config_path}, Category: {request.category or 'Auto'}")
    stem = pathlib.Path(request.config_path).stem
    output_dir = os.path.join(REPORTS_DIR, f"{stem}_{datetime.now().strftime('%Y%m%d_%H%M%S')}")
    orchestrator = OrchestratorAgent(checks_dir=CHECKS_DIR, reports_dir=REPORTS_DIR)
    api_logs = []

    # --- Set up logging capture --- #
    log_stream = io.StringIO()
    root_logger = logging.getLogger()
    stream_handler = logging.StreamHandler(log_stream)
    stream_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
    stream_handler.setLevel(API_LOG_LEVEL)
    original_level = root_logger.level
    if root_logger.level > API_LOG_LEVEL:
        root_logger.setLevel(API_LOG_LEVEL)
    root_logger.addHandler(stream_handler)
    api_logs.append(f"API: Log capture initialized at level {logging.getLevelName(API_LOG_LEVEL)}.")

    try:
        outcome = orchestrator.run_experiment(request.config_path, request.category, output_dir)
        success = outcome.exit_code == EXIT_OK
        message = "Experiment finished." if success else f"Experiment finished with exit code {outcome.exit_code}."
        summary = None
        if outcome.results:
            passed = sum(1 for r in outcome.results if r.get('verdict') == PASS)
            summary = f"Checks Passed: {passed} out of {len(outcome.results)}"
        api_logs.append(f"API: Processing complete. {message}")
        return ExperimentResponse(
            success=success,
            message=message,
            exit_code=outcome.exit_code,
            report_path=outcome.report_path or None,
            output_directory=output_dir,
            logs=api_logs + log_stream.getvalue().splitlines(),
            summary=summary,
        )
    except Exception as e:
        logger.error(f"Failed to run experiment: {e}", exc_info=True)
        error_message = f"Failed to run experiment: {e}"
        return ExperimentResponse(
            success=False,
            message=error_message,
            exit_code=EXIT_UNEXPECTED,
            logs=api_logs + log_stream.getvalue().splitlines() + [f"ERROR: {error_message}"],
        )
    finally:
        root_logger.removeHandler(stream_handler)
        root_logger.setLevel(original_level)
        log_stream.close()


# --- Run the server (for local development) ---
if __name__ == "__main__":
    import uvicorn
    host = os.getenv("API_HOST", "127.0.0.1")
    port = int(os.getenv("API_PORT", 8000))
    logger.info(f"Starting Oldroyd-B Experiments API server on {host}:{port}")
    uvicorn.run("api_server:app", host=host, port=port, reload=True)
