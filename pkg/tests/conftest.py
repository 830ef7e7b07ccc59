import json
from pathlib import Path

import numpy as np
import pytest

from whatif.dataset import ColumnSpec, Dataset

# Hypothetical shoe store: 7 customers, price is the metric.
SHOE_COLUMNS = [
    ColumnSpec("is_male", "indicator-feature"),
    ColumnSpec("age", "numeric-feature"),
    ColumnSpec("shoe_size", "numeric-feature"),
    ColumnSpec("is_single", "indicator-feature"),
    ColumnSpec("price", "metric"),
]
SHOE_ROWS = [
    # is_male, age, shoe_size, is_single, price
    (0, 97, 34, 0, 180),
    (0, 85, 53, 1, 150),
    (1, 80, 47, 1, 390),
    (1, 45, 49, 0, 180),
    (1, 54, 50, 1, 300),
    (1, 79, 54, 1, 340),
    (0, 69, 39, 0, 250),
]


def shoe_values():
    arr = np.array(SHOE_ROWS, dtype=float)
    return {c.name: arr[:, i] for i, c in enumerate(SHOE_COLUMNS)}


@pytest.fixture
def shoes() -> Dataset:
    return Dataset(SHOE_COLUMNS, shoe_values())


@pytest.fixture
def shoes_csv(tmp_path: Path) -> tuple[Path, Path]:
    """(csv_path, schema_path) for the shoe-store fixture."""
    csv_path = tmp_path / "shoes.csv"
    lines = [",".join(c.name for c in SHOE_COLUMNS)]
    for row in SHOE_ROWS:
        lines.append(",".join(str(v) for v in row))
    csv_path.write_text("\n".join(lines) + "\n")
    schema_path = tmp_path / "shoes.schema.json"
    schema_path.write_text(json.dumps(
        {"columns": [{"name": c.name, "kind": c.kind} for c in SHOE_COLUMNS]}
    ))
    return csv_path, schema_path


DOUBLE_MALES = {
    "constraints": [
        {
            "feature": "is_male",
            "statistic": "count-multiplier",
            "relation": "eq",
            "target": {"mode": "multiple-of-baseline", "value": 2},
        }
    ]
}

MALE_AGE_100 = {
    "constraints": [
        {
            "label": "male-age-100",
            "feature": "age",
            "condition": "is_male",
            "statistic": "conditional-mean",
            "relation": "eq",
            "target": {"mode": "absolute", "value": 100},
        }
    ]
}


@pytest.fixture
def double_males_json(tmp_path: Path) -> Path:
    p = tmp_path / "double_males.json"
    p.write_text(json.dumps(DOUBLE_MALES))
    return p


@pytest.fixture
def male_age_100_json(tmp_path: Path) -> Path:
    p = tmp_path / "male_age_100.json"
    p.write_text(json.dumps(MALE_AGE_100))
    return p
