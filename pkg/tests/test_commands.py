"""
Integration tests for the command layer and entrypoint.

Commands run through `main(argv)` with config files in a temporary directory;
stdout documents are re-parsed with the same models that produced them.
"""

import io
import json

import pytest

from src.handlers.commands import (
    CommandManager,
    cmd_approx,
    cmd_exact,
    cmd_table1,
    cmd_verify,
    matches_printed,
    round_printed,
)
from src.handlers.documents import (
    ComparisonDocument,
    ExactDocument,
    SimulationDocument,
    TableDocument,
    VerifyDocument,
    parse_document,
    render_csv,
    render_json,
    render_table,
)
from src.handlers.reference import TWO_CELL_ROWS, find_row
from src.lattice.model import SystemParams, TypeSpec
from src.tasep_main import main


def write_config(path, params):
    path.write_text(json.dumps(params.to_config()), encoding="utf-8")
    return str(path)


@pytest.fixture
def row_one_config(tmp_path):
    return write_config(tmp_path / "row1.json", TWO_CELL_ROWS[0].params)


@pytest.fixture
def special_config(tmp_path):
    params = SystemParams(
        n_cells=2,
        alpha=0.35,
        types=(
            TypeSpec(arrival_weight=0.3, hop_prob=0.5, exit_prob=0.45),
            TypeSpec(arrival_weight=0.7, hop_prob=0.9, exit_prob=0.45),
        ),
    )
    return write_config(tmp_path / "special.json", params)


class TestRounding:
    """Printed-value comparison rules."""

    def test_half_to_even(self):
        """Test banker's rounding at four decimals."""
        assert round_printed(0.12345) == 0.1234
        assert round_printed(0.12355) == 0.1236
        assert round_printed(0.51493) == 0.5149

    def test_tolerance(self):
        """Test one unit in the fourth decimal."""
        assert matches_printed(0.51494, 0.5149)
        assert matches_printed(0.51495, 0.5149)
        assert not matches_printed(0.51497, 0.5149)


class TestBuilders:
    """Document builders without the command line."""

    def test_table_reproduces_every_printed_value(self):
        """Test all five rows plus the three-cell example."""
        document = cmd_table1()
        assert document.passed
        assert [row.id for row in document.rows] == ["1", "2", "3", "4", "5", "three-cell"]
        total = sum(len(row.exact_pass) + len(row.approximate_pass) for row in document.rows)
        assert total == 30 + 8

    def test_table_row_three(self):
        """Test row 3 exact over approximate."""
        row = next(r for r in cmd_table1().rows if r.id == "3")
        assert all(map(matches_printed, row.exact, [0.3583, 0.4278, 0.1283]))
        assert all(map(matches_printed, row.approximate, [0.3529, 0.4314, 0.1294]))
        assert row.printed_exact == [0.3583, 0.4278, 0.1283]

    def test_table_row_two_flow(self):
        """Test the flow of row 2."""
        row = next(r for r in cmd_table1().rows if r.id == "2")
        assert matches_printed(row.exact[-1], 0.1173)
        assert matches_printed(row.approximate[-1], 0.1176)

    def test_exact_row_four(self):
        """Test the exact document of row 4."""
        document = cmd_exact(find_row("4").params)
        computed = [*document.density, document.flow.in_]
        assert all(map(matches_printed, computed, [0.4752, 0.4393, 0.1679]))
        assert len(document.pi) == 9
        assert document.closed_form_density is None

    def test_exact_single_cell_closed_form(self):
        """Test that the single-cell document carries alpha / (alpha + beta)."""
        params = SystemParams(
            n_cells=1,
            alpha=0.3,
            types=(TypeSpec(arrival_weight=1.0, hop_prob=0.5, exit_prob=0.2),),
        )
        document = cmd_exact(params)
        assert document.closed_form_density == pytest.approx(0.6)
        assert document.density[0] == pytest.approx(0.6, abs=1e-12)

    def test_approx_row_five(self):
        """Test the comparison document of row 5."""
        document = cmd_approx(find_row("5").params)
        exact = [*document.exact.density, document.exact.flow.in_]
        approx = [*document.approximate.density, document.approximate.flow.in_]
        assert all(map(matches_printed, exact, [0.5744, 0.5958, 0.1362]))
        assert all(map(matches_printed, approx, [0.5723, 0.6048, 0.1369]))

    def test_verify_suite(self):
        """Test a small seeded suite."""
        document = cmd_verify(draws=5, seed=1)
        assert document.passed
        assert len(document.reports) == 25
        assert document.manifest.seed == 1

    def test_probe_alone_for_three_cells(self):
        """Test that the probe runs alone for N != 2 and never fails the run."""
        document = cmd_verify(find_row("three-cell").params, probe=True)
        assert [r.name for r in document.reports] == ["occupancy class probe"]
        assert document.reports[0].exploratory
        assert document.passed


class TestDocuments:
    """Rendering and re-parsing."""

    @pytest.mark.parametrize(
        "build,kind",
        [
            (lambda: cmd_exact(TWO_CELL_ROWS[0].params), ExactDocument),
            (lambda: cmd_approx(TWO_CELL_ROWS[0].params), ComparisonDocument),
            (lambda: cmd_verify(draws=2, seed=5), VerifyDocument),
            (lambda: cmd_table1(rows=TWO_CELL_ROWS[:1]), TableDocument),
        ],
    )
    def test_json_reparses(self, build, kind):
        """Test that every document re-parses under its own model."""
        document = build()
        parsed = parse_document(render_json(document))
        assert isinstance(parsed, kind)
        assert parsed == document

    def test_flow_uses_in_key(self):
        """Test that the flow block is written with the key "in"."""
        data = json.loads(render_json(cmd_exact(TWO_CELL_ROWS[0].params)))
        assert set(data["flow"]) == {"in", "cross", "out"}
        assert data["manifest"]["command"] == "exact"
        assert data["manifest"]["config"]["alpha"] == 0.4

    def test_csv_layout(self):
        """Test the long-format CSV of a comparison."""
        text = render_csv(cmd_approx(TWO_CELL_ROWS[0].params))
        lines = text.strip().splitlines()
        assert lines[0] == "quantity,cell,exact,approximate,abs_error,rel_error"
        assert len(lines) == 1 + 2 + 1

    def test_table_layout(self):
        """Test the human table of an exact run."""
        text = render_table(cmd_exact(TWO_CELL_ROWS[0].params))
        assert "Exact stationary analysis" in text
        assert "J = 0.1940" in text


class TestMain:
    """Entrypoint, exit statuses and output files."""

    def test_table1(self, capsys):
        """Test the benchmark command exits 0 and prints a summary."""
        assert main(["table1"]) == 0
        assert "38 of 38 printed values reproduced" in capsys.readouterr().out

    def test_exact_json(self, capsys, row_one_config):
        """Test exact with JSON output."""
        assert main(["exact", "--config", row_one_config, "--format", "json"]) == 0
        document = parse_document(capsys.readouterr().out)
        assert isinstance(document, ExactDocument)
        assert document.manifest.finished_at is not None

    def test_out_file(self, capsys, tmp_path, row_one_config):
        """Test that --out writes a re-parsable document listing itself."""
        out = tmp_path / "result.json"
        assert main(["approx", "--config", row_one_config, "--out", str(out)]) == 0
        document = parse_document(out.read_text(encoding="utf-8"))
        assert isinstance(document, ComparisonDocument)
        assert document.manifest.outputs == [str(out)]

    def test_malformed_config(self, capsys, tmp_path):
        """Test that a schema error exits 2."""
        path = tmp_path / "bad.json"
        path.write_text('{"n_cells": 2, "alpha": "x"}', encoding="utf-8")
        assert main(["exact", "--config", str(path)]) == 2
        assert "SCHEMA_ERROR" in capsys.readouterr().err

    def test_missing_config_flag(self, capsys):
        """Test that commands needing a config exit 2 without one."""
        assert main(["exact"]) == 2
        assert "requires --config" in capsys.readouterr().err

    def test_state_space_too_large(self, capsys, tmp_path, row_one_config):
        """Test that --cap turns into a state-space error."""
        assert main(["exact", "--config", row_one_config, "--cap", "4"]) == 2
        assert "use simulator" in capsys.readouterr().err

    def test_long_lattice_exact_needs_simulator(self, capsys, tmp_path):
        """Test that a valid ten-thousand-cell config exits 2 with a size message."""
        params = SystemParams(
            n_cells=10_000,
            alpha=0.5,
            types=(
                TypeSpec(arrival_weight=0.5, hop_prob=0.5, exit_prob=0.5),
                TypeSpec(arrival_weight=0.5, hop_prob=0.7, exit_prob=0.5),
            ),
        )
        config = write_config(tmp_path / "long.json", params)
        assert main(["exact", "--config", config]) == 2
        err = capsys.readouterr().err
        assert "use simulator" in err
        assert "3^10000" in err

    def test_simulate_is_deterministic(self, capsys, row_one_config):
        """Test that the same seed yields the same estimate document."""
        argv = ["simulate", "--config", row_one_config, "--format", "json", "--seed", "1"]
        argv += ["--steps", "20000", "--warmup", "100"]
        assert main(argv) == 0
        first = json.loads(capsys.readouterr().out)
        assert main(argv) == 0
        second = json.loads(capsys.readouterr().out)
        for document in (first, second):
            document["manifest"].pop("started_at")
            document["manifest"].pop("finished_at")
        assert first == second
        assert first["generator"] == "Philox4x64-10"
        assert first["seed"] == 1
        assert len(first["flow"]["cross"]) == 1
        assert len(first["density_by_type"]) == 2
        assert len(first["stderr"]["flow_cross"]) == 1

    def test_simulate_forced_absorbing(self, capsys, tmp_path):
        """Test a forced alpha = 0 run: empty lattice, zero flow."""
        params = SystemParams(
            n_cells=2,
            alpha=0.0,
            types=(TypeSpec(arrival_weight=1.0, hop_prob=0.5, exit_prob=0.5),),
        )
        config = write_config(tmp_path / "absorbing.json", params)
        argv = ["simulate", "--config", config, "--force", "--steps", "1000", "--format", "json"]
        assert main(argv) == 0
        document = parse_document(capsys.readouterr().out)
        assert isinstance(document, SimulationDocument)
        assert document.density == [0.0, 0.0]

    def test_simulate_rejects_bad_batches(self, capsys, row_one_config):
        """Test that inconsistent simulation flags exit 2."""
        argv = ["simulate", "--config", row_one_config, "--steps", "10", "--batches", "20"]
        assert main(argv) == 2

    def test_verify_suite(self, capsys):
        """Test the built-in suite exits 0."""
        assert main(["verify", "--draws", "5", "--seed", "3"]) == 0
        assert "25 of 25 reports passed" in capsys.readouterr().out

    def test_verify_special_config(self, capsys, special_config):
        """Test verification of a special-case config."""
        assert main(["verify", "--config", special_config]) == 0

    def test_verify_unequal_exits_needs_flag(self, capsys, row_one_config):
        """Test that a benchmark row is refused without --allow-mismatch."""
        assert main(["verify", "--config", row_one_config]) == 2
        assert "PRECONDITION_VIOLATED" in capsys.readouterr().err

    def test_literal_equation_shows_misprint(self, capsys, row_one_config):
        """Test that the literal type-2 equation leaves a visible residual."""
        argv = ["verify", "--config", row_one_config, "--allow-mismatch"]
        argv += ["--eq23-paper-literal", "--format", "json"]
        assert main(argv) == 1
        document = parse_document(capsys.readouterr().out)
        balance = next(r for r in document.reports if r.name.endswith("(uncorrected)"))
        residual = next(c.residual for c in balance.checks if c.id == "balance(2,0)")
        assert residual > 1e-6

    def test_schema(self, capsys):
        """Test the schema command prints the config schema."""
        assert main(["schema"]) == 0
        schema = json.loads(capsys.readouterr().out)
        assert "types" in schema["properties"]

    def test_schema_unwritable_out(self, capsys, tmp_path):
        """Test that a schema --out into a missing directory exits 2."""
        out = tmp_path / "missing" / "schema.json"
        assert main(["schema", "--out", str(out)]) == 2
        assert "OUTPUT_NOT_WRITABLE" in capsys.readouterr().err

    def test_bad_seed_is_usage_error(self, capsys):
        """Test that argparse rejects a negative seed with status 2."""
        with pytest.raises(SystemExit) as exc_info:
            main(["simulate", "--seed", "-1"])
        assert exc_info.value.code == 2

    def test_invalid_environment(self, capsys, monkeypatch):
        """Test that a bad environment variable exits 2."""
        monkeypatch.setenv("TASEP_STATE_CAP", "lots")
        assert main(["table1"]) == 2

    def test_unexpected_error_is_logged(self, caplog):
        """Test that an unexpected exception maps to status 1."""
        stderr = io.StringIO()
        manager = CommandManager(stdout=io.StringIO(), stderr=stderr)

        def explode():
            raise RuntimeError("boom")

        assert manager._guard("exact", explode) == 1
        assert "boom" in stderr.getvalue()
        assert "Unexpected error in exact" in caplog.text
