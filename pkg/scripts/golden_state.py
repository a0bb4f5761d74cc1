"""Record oracle-derived golden values used by the tests.

Writes ``tests/golden/state_333_322.json`` (both reactor outlets at the
global optimum, from stiff time integration plus a MINPACK polish to a
1e-12 scaled residual)
and ``tests/golden/kappas.json`` (seeded exploration-weight draws).
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from oracles import cstr_time_stepping  # noqa: E402

from parbo.acquisition import sample_kappas  # noqa: E402
from parbo.config import default_config_path, load  # noqa: E402
from parbo.reactor.model import rate_constants, reaction_rates  # noqa: E402
from parbo.reactor.params import STOICHIOMETRY  # noqa: E402


def main(out_dir):
    out = Path(out_dir)
    p = load(default_config_path()).reactor_params()
    k1, kr1 = rate_constants(p, np.array([333.0]))
    C1, _ = cstr_time_stepping(p.feed_concentration, p.volume[0] / p.feed_flow, k1[0], kr1[0],
                               STOICHIOMETRY, reaction_rates)
    F2 = p.feed_flow + p.side_flow
    C_in2 = (p.feed_flow * C1 + p.side_flow * p.side_concentration) / F2
    k2, kr2 = rate_constants(p, np.array([322.0]))
    C2, _ = cstr_time_stepping(C_in2, p.volume[1] / F2, k2[0], kr2[0], STOICHIOMETRY, reaction_rates)
    (out / "state_333_322.json").write_text(json.dumps({"T1": 333.0, "T2": 322.0, "C1": C1.tolist(),
                                                        "C2": C2.tolist()}, indent=1) + "\n")
    kap = sample_kappas(8, 1.0, np.random.default_rng(2024))
    (out / "kappas.json").write_text(json.dumps({"seed": 2024, "rate": 1.0, "values": kap.tolist()}, indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/golden")
