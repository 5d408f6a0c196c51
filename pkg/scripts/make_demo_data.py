"""Write data/prostate_like.csv: a seeded synthetic dataset with prostate-style columns.

The covariates mimic the scales of the classic prostate cancer data (97
men, 8 clinical measures, log PSA response); the values are simulated.
"""

from pathlib import Path

import numpy as np

from selinf.io import write_csv
from selinf.linalg import Dataset

NAMES = ("lcavol", "lweight", "age", "lbph", "svi", "lcp", "gleason", "pgg45")


def make(seed: int = 20170) -> Dataset:
    rng = np.random.default_rng(seed)
    n = 97
    lcavol = rng.normal(1.35, 1.18, n)
    lweight = rng.normal(3.63, 0.43, n)
    age = np.round(rng.normal(63.9, 7.4, n))
    lbph = rng.normal(0.1, 1.45, n)
    svi = (lcavol + rng.normal(0, 1.2, n) > 2.3).astype(float)
    lcp = 0.6 * lcavol + rng.normal(-0.9, 1.0, n)
    gleason = np.clip(np.round(6.4 + 0.3 * lcavol + rng.normal(0, 0.6, n)), 6, 9)
    pgg45 = np.clip(np.round(10 * (gleason - 6) + rng.normal(15, 15, n)), 0, 100)
    X = np.column_stack([lcavol, lweight, age, lbph, svi, lcp, gleason, pgg45])
    y = 0.2 + 0.57 * lcavol + 0.6 * lweight + 0.13 * lbph + 0.7 * svi + rng.normal(0, 0.7, n)
    return Dataset(np.round(y, 6), np.round(X, 6), NAMES)


if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "data" / "prostate_like.csv"
    write_csv(make(), out, response_name="lpsa")
    print(out)
