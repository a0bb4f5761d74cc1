"""Write the 13 x 13 golden grid (T1, T2, f, f1, f2, g) of the shipped config.

Usage: ``python scripts/golden_grid.py tests/golden/grid13.csv``.  ``f1``
and ``f2`` follow the config's split; ``g`` is the closed-form reference.
"""

import sys
import warnings

import numpy as np

from parbo.config import default_config_path, load
from parbo.reactor import performance, reference_fit, reference_performance

N = 13


def main(out):
    rc = load(default_config_path())
    p = rc.reactor_params()
    r = rc.problem["reference"]
    split = rc.problem["split"]
    fit = reference_fit(p, np.linspace(303, 423, r["samples"]), r["pairing"])
    T = np.linspace(303, 423, N)
    A, B = (m.ravel() for m in np.meshgrid(T, T, indexing="ij"))
    f, f1, f2 = performance(p, A, B, split=split)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g, _, _ = reference_performance(p, fit, A, B, split=split)
    with open(out, "w") as fh:
        fh.write("T1,T2,f,f1,f2,g\n")
        for row in zip(A, B, f, f1, f2, g):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
