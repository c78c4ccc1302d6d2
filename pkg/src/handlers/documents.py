"""
Output documents.

Every command result is a pydantic model with an embedded RunManifest, so any
emitted JSON re-parses with `parse_document`. Cell and state order follow the
codec order for stable diffs.
"""

from datetime import datetime, timezone
from typing import Annotated, Any, Literal, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from src import __version__
from src.handlers import messages
from src.lattice.approx import ComparisonReport
from src.lattice.exact import ExactResult, Observables
from src.lattice.model import SystemParams
from src.lattice.sim import GENERATOR_NAME, SimEstimate
from src.lattice.theorems import TheoremReport


class RunManifest(BaseModel):
    command: str
    config: dict[str, Any] | None = None
    seed: int | None = None
    tool_version: str = __version__
    started_at: datetime
    finished_at: datetime | None = None
    outputs: list[str] = Field(default_factory=list)


class FlowBlock(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    in_: float = Field(alias="in")
    cross: list[float]
    out: float


class ObservablesBlock(BaseModel):
    density: list[float]
    density_by_type: list[list[float]]
    flow: FlowBlock


class ExactDocument(ObservablesBlock):
    kind: Literal["exact"] = "exact"
    manifest: RunManifest
    pi: list[float]
    residual: float
    method: str
    closed_form_density: float | None = None


class ErrorBlock(BaseModel):
    density_abs: list[float]
    density_rel: list[float]
    flow_abs: float
    flow_rel: float


class ComparisonDocument(BaseModel):
    kind: Literal["approx"] = "approx"
    manifest: RunManifest
    exact: ObservablesBlock
    approximate: ObservablesBlock
    error: ErrorBlock


class StderrBlock(BaseModel):
    density: list[float]
    flow_in: float
    flow_cross: list[float]
    flow_out: float


class SimulationDocument(ObservablesBlock):
    kind: Literal["simulate"] = "simulate"
    manifest: RunManifest
    stderr: StderrBlock
    total_steps: int
    seed: int
    generator: str = GENERATOR_NAME
    replicas: int = 1


class CheckRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: str
    lhs: float
    rhs: float
    residual: float
    pass_: bool = Field(alias="pass")


class ReportRecord(BaseModel):
    name: str
    params: dict[str, Any]
    exploratory: bool
    passed: bool
    checks: list[CheckRecord]


class VerifyDocument(BaseModel):
    kind: Literal["verify"] = "verify"
    manifest: RunManifest
    reports: list[ReportRecord]
    passed: bool


class TableRow(BaseModel):
    id: str
    params: dict[str, Any]
    quantities: list[str]
    exact: list[float]
    approximate: list[float]
    exact_rounded: list[float]
    approximate_rounded: list[float]
    printed_exact: list[float]
    printed_approximate: list[float]
    exact_pass: list[bool]
    approximate_pass: list[bool]


class TableDocument(BaseModel):
    kind: Literal["table1"] = "table1"
    manifest: RunManifest
    tolerance: float
    rows: list[TableRow]
    passed: bool


Document = Annotated[
    Union[ExactDocument, ComparisonDocument, SimulationDocument, VerifyDocument, TableDocument],
    Field(discriminator="kind"),
]

_DOCUMENT_ADAPTER = TypeAdapter(Document)


def now() -> datetime:
    return datetime.now(timezone.utc)


def new_manifest(
    command: str,
    params: SystemParams | None = None,
    seed: int | None = None,
    outputs: list[str] | None = None,
) -> RunManifest:
    return RunManifest(
        command=command,
        config=params.to_config() if params is not None else None,
        seed=seed,
        started_at=now(),
        outputs=outputs or [],
    )


def _floats(values: np.ndarray) -> list[float]:
    return [float(value) for value in np.asarray(values).ravel()]


def observables_block(obs: Observables) -> ObservablesBlock:
    return ObservablesBlock(
        density=_floats(obs.density),
        density_by_type=[_floats(row) for row in obs.density_by_type],
        flow=FlowBlock(in_=obs.flow_in, cross=_floats(obs.flow_cross), out=obs.flow_out),
    )


def exact_document(
    result: ExactResult, manifest: RunManifest, closed_form: float | None = None
) -> ExactDocument:
    block = observables_block(result.observables)
    return ExactDocument(
        manifest=manifest,
        pi=_floats(result.distribution.probabilities),
        residual=result.distribution.residual,
        method=result.distribution.method,
        closed_form_density=closed_form,
        **block.model_dump(),
    )


def comparison_document(report: ComparisonReport, manifest: RunManifest) -> ComparisonDocument:
    return ComparisonDocument(
        manifest=manifest,
        exact=observables_block(report.exact),
        approximate=observables_block(report.approximate),
        error=ErrorBlock(
            density_abs=_floats(report.density_abs_error),
            density_rel=_floats(report.density_rel_error),
            flow_abs=report.flow_abs_error,
            flow_rel=report.flow_rel_error,
        ),
    )


def simulation_document(
    estimate: SimEstimate, manifest: RunManifest, replicas: int = 1
) -> SimulationDocument:
    return SimulationDocument(
        manifest=manifest,
        density=_floats(estimate.density),
        density_by_type=[_floats(row) for row in estimate.density_by_type],
        flow=FlowBlock(
            in_=estimate.flow, cross=_floats(estimate.flow_cross), out=estimate.flow_out
        ),
        stderr=StderrBlock(
            density=_floats(estimate.density_stderr),
            flow_in=estimate.flow_stderr,
            flow_cross=_floats(estimate.flow_cross_stderr),
            flow_out=estimate.flow_out_stderr,
        ),
        total_steps=estimate.total_steps,
        seed=estimate.seed,
        replicas=replicas,
    )


def report_record(report: TheoremReport, params: SystemParams) -> ReportRecord:
    return ReportRecord(
        name=report.name,
        params=params.to_config(),
        exploratory=report.exploratory,
        passed=report.passed,
        checks=[
            CheckRecord(
                id=check.id,
                lhs=check.lhs,
                rhs=check.rhs,
                residual=check.residual,
                pass_=check.passed,
            )
            for check in report.checks
        ],
    )


def parse_document(text: str) -> BaseModel:
    """Re-parse an emitted JSON document under the same models."""
    return _DOCUMENT_ADAPTER.validate_json(text)


def render_json(document: BaseModel) -> str:
    return document.model_dump_json(indent=2, by_alias=True)


def _records(document: BaseModel) -> list[dict[str, Any]]:
    if isinstance(document, ExactDocument):
        records = []
        for cell, value in enumerate(document.density, start=1):
            records.append({"quantity": "density", "cell": cell, "value": value})
            for k, by_type in enumerate(document.density_by_type[cell - 1], start=1):
                records.append({"quantity": f"density_type_{k}", "cell": cell, "value": by_type})
        records.append({"quantity": "flow_in", "cell": None, "value": document.flow.in_})
        for bond, value in enumerate(document.flow.cross, start=1):
            records.append({"quantity": "flow_cross", "cell": bond, "value": value})
        records.append({"quantity": "flow_out", "cell": None, "value": document.flow.out})
        return records

    if isinstance(document, ComparisonDocument):
        records = [
            {
                "quantity": "density",
                "cell": cell,
                "exact": exact,
                "approximate": approximate,
                "abs_error": abs_error,
                "rel_error": rel_error,
            }
            for cell, (exact, approximate, abs_error, rel_error) in enumerate(
                zip(
                    document.exact.density,
                    document.approximate.density,
                    document.error.density_abs,
                    document.error.density_rel,
                ),
                start=1,
            )
        ]
        records.append(
            {
                "quantity": "flow",
                "cell": None,
                "exact": document.exact.flow.in_,
                "approximate": document.approximate.flow.in_,
                "abs_error": document.error.flow_abs,
                "rel_error": document.error.flow_rel,
            }
        )
        return records

    if isinstance(document, SimulationDocument):
        records = [
            {"quantity": "density", "cell": cell, "mean": mean, "stderr": stderr}
            for cell, (mean, stderr) in enumerate(
                zip(document.density, document.stderr.density), start=1
            )
        ]
        for cell, by_type in enumerate(document.density_by_type, start=1):
            for k, mean in enumerate(by_type, start=1):
                records.append(
                    {"quantity": f"density_type_{k}", "cell": cell, "mean": mean, "stderr": None}
                )
        records.append(
            {
                "quantity": "flow_in",
                "cell": None,
                "mean": document.flow.in_,
                "stderr": document.stderr.flow_in,
            }
        )
        for bond, (mean, stderr) in enumerate(
            zip(document.flow.cross, document.stderr.flow_cross), start=1
        ):
            records.append({"quantity": "flow_cross", "cell": bond, "mean": mean, "stderr": stderr})
        records.append(
            {
                "quantity": "flow_out",
                "cell": None,
                "mean": document.flow.out,
                "stderr": document.stderr.flow_out,
            }
        )
        return records

    if isinstance(document, VerifyDocument):
        return [
            {
                "report": report.name,
                "id": check.id,
                "lhs": check.lhs,
                "rhs": check.rhs,
                "residual": check.residual,
                "pass": check.pass_,
            }
            for report in document.reports
            for check in report.checks
        ]

    if isinstance(document, TableDocument):
        return [
            {
                "row": row.id,
                "quantity": name,
                "exact": row.exact[i],
                "exact_printed": row.printed_exact[i],
                "exact_pass": row.exact_pass[i],
                "approximate": row.approximate[i],
                "approximate_printed": row.printed_approximate[i],
                "approximate_pass": row.approximate_pass[i],
            }
            for row in document.rows
            for i, name in enumerate(row.quantities)
        ]

    raise TypeError(f"no CSV layout for {type(document).__name__}")


def render_csv(document: BaseModel) -> str:
    return pd.DataFrame.from_records(_records(document)).to_csv(index=False)


def _status(passed: bool) -> str:
    return messages.PASS if passed else messages.FAIL


def _render_exact(document: ExactDocument) -> list[str]:
    n_types = len(document.density_by_type[0]) if document.density_by_type else 0
    lines = [
        messages.EXACT_HEADER.format(
            n_cells=len(document.density),
            n_types=n_types,
            n_states=len(document.pi),
            method=document.method,
            residual=document.residual,
        ),
        messages.DENSITY_HEADER.format(
            type_columns="  ".join(f"type {k:<3}" for k in range(1, n_types + 1))
        ),
    ]
    for cell, (density, by_type) in enumerate(
        zip(document.density, document.density_by_type), start=1
    ):
        lines.append(
            messages.DENSITY_ROW.format(
                cell=cell,
                density=density,
                by_type="  ".join(f"{value:.4f}  " for value in by_type),
            )
        )
    lines.append(
        messages.FLOW_SUMMARY.format(
            flow_in=document.flow.in_,
            cross=", ".join(f"{value:.6f}" for value in document.flow.cross),
            flow_out=document.flow.out,
        )
    )
    if document.closed_form_density is not None:
        lines.append(messages.CLOSED_FORM_LINE.format(value=document.closed_form_density))
    return lines


def _render_comparison(document: ComparisonDocument) -> list[str]:
    lines = [
        messages.COMPARISON_HEADER.format(
            n_cells=len(document.exact.density),
            n_types=len(document.exact.density_by_type[0]),
        )
    ]
    for cell, values in enumerate(
        zip(
            document.exact.density,
            document.approximate.density,
            document.error.density_abs,
            document.error.density_rel,
        ),
        start=1,
    ):
        exact, approximate, abs_error, rel_error = values
        lines.append(
            messages.COMPARISON_ROW.format(
                name=f"rho_{cell}",
                exact=exact,
                approximate=approximate,
                abs_error=abs_error,
                rel_error=rel_error,
            )
        )
    lines.append(
        messages.COMPARISON_ROW.format(
            name="J",
            exact=document.exact.flow.in_,
            approximate=document.approximate.flow.in_,
            abs_error=document.error.flow_abs,
            rel_error=document.error.flow_rel,
        )
    )
    return lines


def _render_simulation(document: SimulationDocument) -> list[str]:
    lines = [
        messages.SIMULATION_HEADER.format(
            generator=document.generator,
            seed=document.seed,
            total_steps=document.total_steps,
            replicas=document.replicas,
        )
    ]
    for cell, (mean, stderr) in enumerate(zip(document.density, document.stderr.density), start=1):
        lines.append(messages.SIMULATION_ROW.format(name=f"rho_{cell}", mean=mean, stderr=stderr))
    lines.append(
        messages.SIMULATION_ROW.format(
            name="J", mean=document.flow.in_, stderr=document.stderr.flow_in
        )
    )
    for bond, (mean, stderr) in enumerate(
        zip(document.flow.cross, document.stderr.flow_cross), start=1
    ):
        lines.append(
            messages.SIMULATION_ROW.format(name=f"J_{bond},{bond + 1}", mean=mean, stderr=stderr)
        )
    lines.append(
        messages.SIMULATION_ROW.format(
            name="J_exit", mean=document.flow.out, stderr=document.stderr.flow_out
        )
    )
    return lines


def _render_verify(document: VerifyDocument) -> list[str]:
    lines = []
    for report in document.reports:
        max_residual = max((check.residual for check in report.checks), default=0.0)
        lines.append(
            messages.VERIFY_REPORT.format(
                status=_status(report.passed),
                name=report.name,
                exploratory=" [exploratory]" if report.exploratory else "",
                max_residual=max_residual,
            )
        )
        for check in report.checks:
            if not check.pass_:
                lines.append(
                    messages.VERIFY_CHECK.format(
                        status=_status(check.pass_), id=check.id, residual=check.residual
                    )
                )
    lines.append(
        messages.VERIFY_SUMMARY.format(
            passed=sum(report.passed for report in document.reports),
            total=len(document.reports),
        )
    )
    return lines


def _render_table(document: TableDocument) -> list[str]:
    lines = [messages.TABLE_HEADER]
    passed = total = 0
    for row in document.rows:
        for i, name in enumerate(row.quantities):
            exact_line = (row.id, row.exact_rounded[i], row.printed_exact[i], row.exact_pass[i])
            approx_line = (
                "",
                row.approximate_rounded[i],
                row.printed_approximate[i],
                row.approximate_pass[i],
            )
            for label, value, printed, ok in (exact_line, approx_line):
                lines.append(
                    messages.TABLE_ROW.format(
                        row=label, name=name, value=value, printed=printed, status=_status(ok)
                    )
                )
                passed += ok
                total += 1
    lines.append(
        messages.TABLE_SUMMARY.format(passed=passed, total=total, tolerance=document.tolerance)
    )
    return lines


def render_table(document: BaseModel) -> str:
    if isinstance(document, ExactDocument):
        lines = _render_exact(document)
    elif isinstance(document, ComparisonDocument):
        lines = _render_comparison(document)
    elif isinstance(document, SimulationDocument):
        lines = _render_simulation(document)
    elif isinstance(document, VerifyDocument):
        lines = _render_verify(document)
    elif isinstance(document, TableDocument):
        lines = _render_table(document)
    else:
        raise TypeError(f"no table layout for {type(document).__name__}")
    return "\n".join(lines)


def render(document: BaseModel, fmt: str) -> str:
    if fmt == "json":
        return render_json(document)
    if fmt == "csv":
        return render_csv(document)
    return render_table(document)
