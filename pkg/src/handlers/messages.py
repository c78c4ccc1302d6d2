"""Human-readable output templates."""

EXACT_HEADER = (
    "Exact stationary analysis\n"
    "N={n_cells}  K={n_types}  states={n_states}  solver={method}  residual={residual:.2e}\n"
)

DENSITY_HEADER = "cell   density  " + "{type_columns}"

DENSITY_ROW = "{cell:>4}   {density:.4f}   {by_type}"

FLOW_SUMMARY = (
    "J = {flow_in:.4f}  (entry {flow_in:.6f}, bonds [{cross}], exit {flow_out:.6f})"
)

CLOSED_FORM_LINE = "closed form alpha/(alpha+beta) = {value:.6f}"

COMPARISON_HEADER = (
    "Exact vs harmonic-mean approximation (N={n_cells}, K={n_types})\n"
    "quantity     exact   approx   abs err   rel err"
)

COMPARISON_ROW = "{name:<10}  {exact:.4f}   {approximate:.4f}   {abs_error:.2e}  {rel_error:.2e}"

SIMULATION_HEADER = (
    "Monte Carlo estimate ({generator}, seed {seed}, {total_steps} steps, "
    "{replicas} replica(s))\n"
    "quantity     mean      stderr"
)

SIMULATION_ROW = "{name:<10}  {mean:.4f}   {stderr:.4f}"

VERIFY_REPORT = "{status}  {name}{exploratory}  (max residual {max_residual:.2e})"

VERIFY_CHECK = "      {status}  {id:<34} residual {residual:.2e}"

VERIFY_SUMMARY = "{passed} of {total} reports passed"

TABLE_HEADER = (
    "Published benchmark reproduction (exact over approximate, 4 decimals)\n"
    "row         quantity  computed  printed  ok"
)

TABLE_ROW = "{row:<10}  {name:<8}  {value:.4f}    {printed:.4f}   {status}"

TABLE_SUMMARY = "{passed} of {total} printed values reproduced within {tolerance:.0e}"

PASS = "PASS"
FAIL = "FAIL"
