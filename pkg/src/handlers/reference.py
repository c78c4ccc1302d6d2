"""
Published benchmark parameter sets.

Parameters are written as exact rationals and converted once, so no decimal
transcription error enters the comparison. Printed values are the 4-decimal
figures the benchmark reports: densities rho_1..rho_N followed by the flow J.
"""

from dataclasses import dataclass
from fractions import Fraction

from src.lattice.model import SystemParams, TypeSpec


@dataclass(frozen=True)
class ReferenceRow:
    id: str
    params: SystemParams
    exact: tuple[float, ...]
    approximate: tuple[float, ...]


def _system(
    n_cells: int,
    alpha: str,
    weights: tuple[str, ...],
    hops: tuple[str, ...],
    exits: tuple[str, ...],
) -> SystemParams:
    return SystemParams(
        n_cells=n_cells,
        alpha=Fraction(alpha),
        types=tuple(
            TypeSpec(arrival_weight=Fraction(a), hop_prob=Fraction(p), exit_prob=Fraction(b))
            for a, p, b in zip(weights, hops, exits, strict=True)
        ),
    )


TWO_CELL_ROWS = (
    ReferenceRow(
        id="1",
        params=_system(2, "2/5", ("3/7", "4/7"), ("3/5", "4/5"), ("3/10", "2/5")),
        exact=(0.5149, 0.5544, 0.1940),
        approximate=(0.5142, 0.5552, 0.1943),
    ),
    ReferenceRow(
        id="2",
        params=_system(2, "1/5", ("2/5", "3/5"), ("2/5", "3/5"), ("1/5", "3/10")),
        exact=(0.4135, 0.4692, 0.1173),
        approximate=(0.4118, 0.4706, 0.1176),
    ),
    ReferenceRow(
        id="3",
        params=_system(2, "1/5", ("1/3", "2/3"), ("2/5", "4/5"), ("1/5", "2/5")),
        exact=(0.3583, 0.4278, 0.1283),
        approximate=(0.3529, 0.4314, 0.1294),
    ),
    ReferenceRow(
        id="4",
        params=_system(2, "8/25", ("3/4", "1/4"), ("12/25", "18/25"), ("9/25", "11/25")),
        exact=(0.4752, 0.4393, 0.1679),
        approximate=(0.4749, 0.4455, 0.1680),
    ),
    ReferenceRow(
        id="5",
        params=_system(2, "8/25", ("3/4", "1/4"), ("12/25", "18/25"), ("1/25", "11/25")),
        exact=(0.5744, 0.5958, 0.1362),
        approximate=(0.5723, 0.6048, 0.1369),
    ),
)

THREE_CELL_ROW = ReferenceRow(
    id="three-cell",
    params=_system(3, "1/5", ("2/5", "3/5"), ("2/5", "3/5"), ("1/5", "3/10")),
    exact=(0.3988, 0.4374, 0.4764, 0.1202),
    approximate=(0.4012, 0.4415, 0.4838, 0.1198),
)

ALL_ROWS = TWO_CELL_ROWS + (THREE_CELL_ROW,)


def find_row(row_id: str) -> ReferenceRow:
    for row in ALL_ROWS:
        if row.id == row_id:
            return row
    raise KeyError(row_id)
