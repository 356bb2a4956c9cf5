"""Regenerate src/rpid/data/credit.csv from the credit config's simulation section.

    python3 scripts/make_credit_data.py
"""

from pathlib import Path

import numpy as np

from rpid.config import builtin_config_path, load_config
from rpid.dataio import write_csv
from rpid.simulation import simulate_worlds

ROWS = 1000


def main():
    config = load_config(builtin_config_path("credit"))
    sim = config.require_simulation()
    data = simulate_worlds(sim, ROWS, np.random.default_rng(config.seed)).real
    out = Path(__file__).resolve().parents[1] / "src" / "rpid" / "data" / "credit.csv"
    write_csv(data, out)
    print(f"wrote {len(data)} rows to {out}")


if __name__ == "__main__":
    main()
