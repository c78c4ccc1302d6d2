"""
Command handlers.

The `cmd_*` builders compute one result document each and raise LatticeError
on failure. CommandManager wraps them for the command line: it loads the
config, renders the document, writes `--out`, and maps errors to exit statuses.
"""

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import TextIO

from pydantic import BaseModel, ValidationError

from src.handlers.documents import (
    ComparisonDocument,
    ExactDocument,
    SimulationDocument,
    TableDocument,
    TableRow,
    VerifyDocument,
    comparison_document,
    exact_document,
    new_manifest,
    now,
    render,
    render_json,
    report_record,
    simulation_document,
)
from src.handlers.reference import ALL_ROWS, ReferenceRow
from src.lattice import approx, exact, sim, theorems
from src.lattice.config import config_schema, load_params
from src.lattice.errors import ConfigError, LatticeError
from src.lattice.model import SystemParams
from src.settings import DEFAULTS, Settings

logger = logging.getLogger(__name__)

TABLE_TOLERANCE = 5e-5
DEFAULT_DRAWS = 100


def round_printed(value: float, places: int = 4) -> float:
    """Round half-to-even at `places` decimals, the way printed tables are compared."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_EVEN))


def matches_printed(value: float, printed: float, tolerance: float = TABLE_TOLERANCE) -> bool:
    return abs(value - printed) <= tolerance + 1e-12


def cmd_exact(
    params: SystemParams,
    settings: Settings = DEFAULTS,
    cap: int | None = None,
    force: bool = False,
) -> ExactDocument:
    """
    Exact stationary analysis of one system.

    Raises:
        LatticeError: from validation, enumeration, solving or flow conservation
    """
    manifest = new_manifest("exact", params)
    result = exact.analyze(
        params,
        cap=cap or settings.state_cap,
        dense_cap=settings.dense_cap,
        tol=settings.power_tol,
        max_iters=settings.power_max_iters,
        force=force,
    )
    exact.check_flow_conservation(result.observables, settings.check_tol)

    closed_form = None
    if params.n_cells == 1 and params.n_types == 1:
        closed_form = exact.single_cell_density(params.alpha, params.exit_probs[0])
    return exact_document(result, manifest, closed_form)


def cmd_approx(
    params: SystemParams, settings: Settings = DEFAULTS, cap: int | None = None
) -> ComparisonDocument:
    manifest = new_manifest("approx", params)
    report = approx.compare(params, cap=cap or settings.state_cap, dense_cap=settings.dense_cap)
    return comparison_document(report, manifest)


def cmd_simulate(
    params: SystemParams,
    config: sim.SimConfig,
    replicas: int = 1,
    force: bool = False,
) -> SimulationDocument:
    manifest = new_manifest("simulate", params, seed=config.seed)
    estimate = sim.run_replicas(params, config, replicas, force=force)
    return simulation_document(estimate, manifest, replicas)


def cmd_verify(
    params: SystemParams | None = None,
    settings: Settings = DEFAULTS,
    allow_mismatch: bool = False,
    uncorrected: bool = False,
    probe: bool = False,
    draws: int = DEFAULT_DRAWS,
    seed: int | None = None,
    cap: int | None = None,
) -> VerifyDocument:
    """
    Run the two-cell identity checks on one system or on the seeded suite.

    Without params, `draws` random special-case systems are checked. With
    `probe`, the exploratory occupancy-class probe is added; for N != 2 it
    runs alone.

    Raises:
        PreconditionError: if params fall outside the special case and
            allow_mismatch is off
    """
    tol = settings.check_tol
    records = []
    if params is None:
        seed = settings.seed if seed is None else seed
        manifest = new_manifest("verify", seed=seed)
        for draw in theorems.special_case_draws(draws, seed):
            for report in theorems.verify_all(draw, uncorrected=uncorrected, tol=tol):
                records.append(report_record(report, draw))
    else:
        manifest = new_manifest("verify", params, seed=seed)
        if params.n_cells == 2 or not probe:
            for report in theorems.verify_all(params, allow_mismatch, uncorrected, tol):
                records.append(report_record(report, params))
        if probe:
            report = theorems.probe_gset_sums(params, cap or settings.state_cap, tol)
            records.append(report_record(report, params))

    passed = all(record.passed for record in records if not record.exploratory)
    logger.info(f"Verification: {len(records)} reports, passed={passed}")
    return VerifyDocument(manifest=manifest, reports=records, passed=passed)


def _table_row(row: ReferenceRow, settings: Settings) -> TableRow:
    report = approx.compare(row.params, dense_cap=settings.dense_cap)
    n_cells = row.params.n_cells
    exact_values = [float(v) for v in report.exact.density] + [report.exact.flow]
    approx_values = [float(v) for v in report.approximate.density] + [report.approximate.flow]
    return TableRow(
        id=row.id,
        params=row.params.to_config(),
        quantities=[f"rho_{i}" for i in range(1, n_cells + 1)] + ["J"],
        exact=exact_values,
        approximate=approx_values,
        exact_rounded=[round_printed(v) for v in exact_values],
        approximate_rounded=[round_printed(v) for v in approx_values],
        printed_exact=list(row.exact),
        printed_approximate=list(row.approximate),
        exact_pass=[matches_printed(v, p) for v, p in zip(exact_values, row.exact)],
        approximate_pass=[matches_printed(v, p) for v, p in zip(approx_values, row.approximate)],
    )


def cmd_table1(
    settings: Settings = DEFAULTS, rows: Sequence[ReferenceRow] = ALL_ROWS
) -> TableDocument:
    """Recompute every published benchmark row, exact and approximate."""
    manifest = new_manifest("table1")
    table_rows = [_table_row(row, settings) for row in rows]
    passed = all(all(r.exact_pass) and all(r.approximate_pass) for r in table_rows)
    logger.info(f"Benchmark reproduction: {len(table_rows)} rows, passed={passed}")
    return TableDocument(
        manifest=manifest, tolerance=TABLE_TOLERANCE, rows=table_rows, passed=passed
    )


class CommandManager:
    """Runs commands from parsed arguments and reports exit statuses."""

    def __init__(
        self,
        settings: Settings = DEFAULTS,
        stdout: TextIO | None = None,
        stderr: TextIO | None = None,
    ):
        self.settings = settings
        self.stdout = stdout or sys.stdout
        self.stderr = stderr or sys.stderr

    def _load(self, args: argparse.Namespace) -> SystemParams:
        if not args.config:
            raise ConfigError(f"{args.command} requires --config", "CONFIG_REQUIRED")
        return load_params(args.config)

    def _write(self, path: str, text: str) -> None:
        try:
            Path(path).write_text(text + "\n", encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot write {path}: {e.strerror}", "OUTPUT_NOT_WRITABLE")
        logger.info(f"Wrote {path}")

    def _emit(self, document: BaseModel, args: argparse.Namespace) -> None:
        manifest = document.manifest
        manifest.finished_at = now()
        if args.out:
            manifest.outputs = [str(args.out)]
            self._write(args.out, render_json(document))
        print(render(document, args.format), file=self.stdout)

    def _guard(self, command: str, action: Callable[[], int]) -> int:
        try:
            return action()
        except LatticeError as e:
            logger.error(f"{command} failed: {e}")
            print(f"error: {e}", file=self.stderr)
            return e.exit_status
        except Exception as e:
            logger.error(f"Unexpected error in {command}: {e}", exc_info=True)
            print(f"error: {e}", file=self.stderr)
            return 1

    def handle_exact(self, args: argparse.Namespace) -> int:
        def action() -> int:
            params = self._load(args)
            self._emit(cmd_exact(params, self.settings, args.cap, args.force), args)
            return 0

        return self._guard("exact", action)

    def handle_approx(self, args: argparse.Namespace) -> int:
        def action() -> int:
            params = self._load(args)
            self._emit(cmd_approx(params, self.settings, args.cap), args)
            return 0

        return self._guard("approx", action)

    def handle_simulate(self, args: argparse.Namespace) -> int:
        """
        Run the Monte Carlo simulator.

        Flags: --seed, --warmup, --steps, --batches, --replicas
        """

        def action() -> int:
            params = self._load(args)
            overrides = {
                "seed": self.settings.seed if args.seed is None else args.seed,
                "warmup_steps": args.warmup,
                "sample_steps": args.steps,
                "batches": args.batches,
            }
            try:
                config = sim.SimConfig(**{k: v for k, v in overrides.items() if v is not None})
            except ValidationError as e:
                first = e.errors()[0]
                raise ConfigError(f"invalid simulation settings: {first['msg']}")
            self._emit(cmd_simulate(params, config, args.replicas, args.force), args)
            return 0

        return self._guard("simulate", action)

    def handle_verify(self, args: argparse.Namespace) -> int:
        """Exit 0 only when every non-exploratory check passes."""

        def action() -> int:
            params = self._load(args) if args.config else None
            document = cmd_verify(
                params,
                self.settings,
                allow_mismatch=args.allow_mismatch,
                uncorrected=args.eq23_paper_literal,
                probe=args.probe,
                draws=args.draws,
                seed=args.seed,
                cap=args.cap,
            )
            self._emit(document, args)
            return 0 if document.passed else 1

        return self._guard("verify", action)

    def handle_table1(self, args: argparse.Namespace) -> int:
        def action() -> int:
            document = cmd_table1(self.settings)
            self._emit(document, args)
            return 0 if document.passed else 1

        return self._guard("table1", action)

    def handle_schema(self, args: argparse.Namespace) -> int:
        def action() -> int:
            text = json.dumps(config_schema(), indent=2)
            if args.out:
                self._write(args.out, text)
            print(text, file=self.stdout)
            return 0

        return self._guard("schema", action)
