import csv
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def iris_like_csv(tmp_path):
    """150 rows, 4 numeric measurements plus a 3-level species column."""
    rng = np.random.default_rng(7)
    rows = []
    for s, species in enumerate(["setosa", "versicolor", "virginica"]):
        base = np.array([5.0 + s, 3.0 + 0.3 * s, 1.5 + 1.8 * s, 0.2 + 0.9 * s])
        for _ in range(50):
            vals = base + rng.normal(0, [0.35, 0.3, 0.4, 0.2])
            rows.append([f"{v:.1f}" for v in vals] + [species])
    return write_csv(tmp_path / "iris_like.csv",
                     ["sepal length", "sepal width", "petal length",
                      "petal width", "species"], rows)


@pytest.fixture
def generic_csv(tmp_path):
    """Numeric table with a categorical class column, a mean shift, one
    missing cell, and one non-numeric token; exercises every pipeline leg."""
    rng = np.random.default_rng(3)
    rows = []
    for i in range(160):
        shift = 8.0 if i >= 80 else 0.0
        a = rng.normal(shift, 1.0)
        b = rng.normal(2.0, 0.5)
        c = 0.8 * a + rng.normal(0, 0.3)
        d = np.sin(2 * np.pi * i / 16.0) + rng.normal(0, 0.2)
        row = [f"{a:.5f}", f"{b:.5f}", f"{c:.5f}", f"{d:.5f}", str(i % 2)]
        rows.append(row)
    rows[5][1] = ""      # missing cell
    rows[9][3] = "bad"   # non-numeric token
    return write_csv(tmp_path / "generic.csv",
                     ["level", "noise", "follow", "wave", "class"], rows)
