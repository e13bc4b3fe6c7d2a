import csv
import io
import logging
import os
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from quaternion_riccati.config import Settings
from quaternion_riccati.errors import QuaternionRiccatiError
from quaternion_riccati.models import CheckResult, RunReport, Scenario, SeedSummary
from quaternion_riccati.scenarios.checks import CHECKS, RunContext

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = (
    "t", "q0", "q1", "q2", "q3",
    "abs_q", "abs_phi", "abs_psi",
    "mu0", "mu1", "mu2", "mu3",
)  # fmt: skip


def format_number(value: float) -> str:
    """Round trip precision for doubles."""
    return f"{value:.17g}"


def csv_text(columns: Sequence[str], rows: np.ndarray) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(float(value)) for value in row])
    return buffer.getvalue()


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to a temporary sibling and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp_path, path)


def trajectory_rows(sol, points: int) -> np.ndarray:
    """``t, q, |q|, |phi|, |psi|, mu`` on a uniform grid over the covered span."""
    samples = sol.samples(sol.grid(points))
    norm = np.linalg.norm
    return np.column_stack(
        [
            samples["t"],
            samples["q"],
            norm(samples["q"], axis=1),
            norm(samples["phi"], axis=1),
            norm(samples["psi"], axis=1),
            samples["mu"],
        ]
    )


def run_scenario(scenario: Scenario, settings: Settings, out_dir: Path) -> RunReport:
    """Integrate the scenario seeds, execute every check and write the outputs.

    ``out_dir/<scenario name>/`` receives one CSV per seed, one CSV per check
    that produces a time series and ``report.json``.
    """
    target = Path(out_dir) / scenario.name
    ctx = RunContext(scenario, settings)
    files: List[str] = []

    seeds = [
        _run_seed(ctx, index, seed, target, files)
        for index, seed in enumerate(scenario.seeds)
    ]

    results = []
    for name, check in zip(scenario.check_names(), scenario.checks):
        result, series = _run_check(ctx, name, check)
        if series:
            file_name = f"{name}.csv"
            columns = list(series)
            write_atomic(
                target / file_name,
                csv_text(columns, np.column_stack([series[c] for c in columns])),
            )
            files.append(file_name)
        results.append(result)

    passed = all(result.passed for result in results)
    passed = passed and not any(seed.error for seed in seeds)
    report = RunReport(
        scenario=scenario.name,
        reference=scenario.reference,
        mode=scenario.mode,
        passed=passed,
        settings=settings.model_dump(mode="json"),
        seeds=seeds,
        checks=results,
        files=files,
    )
    write_atomic(target / "report.json", report.model_dump_json(indent=2) + "\n")
    logger.info(
        "scenario %s: %d/%d checks passed",
        scenario.name,
        sum(result.passed for result in results),
        len(results),
    )
    return report


def _run_seed(
    ctx: RunContext, index: int, seed, target: Path, files: List[str]
) -> SeedSummary:
    try:
        sol = ctx.solution(seed)
    except (QuaternionRiccatiError, ArithmeticError, ValueError) as e:
        error = f"{type(e).__name__}: {e}"
        logger.warning(f"seed {index} failed with {error}")
        return SeedSummary(seed=seed, status="failed", error=error)
    name = f"seed-{index:02d}.csv"
    rows = trajectory_rows(sol, ctx.settings.grid_points)
    write_atomic(target / name, csv_text(TRAJECTORY_COLUMNS, rows))
    files.append(name)
    return SeedSummary(
        seed=seed,
        status=sol.status.value,
        t_end=sol.t_end,
        t_escape=sol.t_escape,
        csv=name,
    )

def _run_check(ctx: RunContext, name: str, check):
    try:
        outcome = CHECKS[check.kind](ctx, check)
    except (QuaternionRiccatiError, ArithmeticError, ValueError) as e:
        error = f"{type(e).__name__}: {e}"
        logger.warning(f"check {name} failed with {error}")
        return CheckResult(name=name, kind=check.kind, passed=False, error=error), None
    measured: Dict[str, float] = {
        key: float(value) for key, value in outcome.measured.items()
    }
    if outcome.passed:
        logger.info(f"check {name}: passed {measured}")
    else:
        logger.warning(f"check {name}: FAILED {measured}")
    result = CheckResult(
        name=name,
        kind=check.kind,
        passed=bool(outcome.passed),
        measured=measured,
        details=outcome.details,
    )
    return result, outcome.series
