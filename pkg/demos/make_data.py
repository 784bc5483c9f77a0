"""Regenerate the bundled synthetic datasets.

Run from the repository root:  python demos/make_data.py

Two files are written into demos/data/:

* passthrough_synthetic.csv - monthly index levels (exchange rate, consumer
  prices, output) whose log differences follow a stationary one-lag system
  with contemporaneous pass-through from the exchange-rate column.  This is
  the demonstration input for the varq driver; it is synthetic and carries
  no real-world information.
* bivariate_synthetic.csv - a cross-section draw from the two-equation
  location-shift design used throughout the tests and demos.
"""

import datetime
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).parent / "data"


def make_passthrough(n_months=252, seed=20240101):
    rng = np.random.default_rng(seed)
    e = np.empty(n_months)
    p = np.empty(n_months)
    y = np.empty(n_months)
    e_prev = p_prev = y_prev = 0.0
    for t in range(n_months):
        e[t] = 0.012 + 0.30 * e_prev + 0.020 * rng.standard_normal()
        p[t] = 0.006 + 0.35 * e[t] + 0.25 * p_prev + 0.006 * rng.standard_normal()
        y[t] = 0.002 - 0.15 * e[t] + 0.20 * y_prev + 0.012 * rng.standard_normal()
        e_prev, p_prev, y_prev = e[t], p[t], y[t]
    # integrate the log differences into positive index levels
    er = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(e[1:])]))
    cpi = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(p[1:])]))
    out = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(y[1:])]))
    start = datetime.date(2004, 1, 1)
    dates = []
    yr, mo = start.year, start.month
    for _ in range(n_months):
        dates.append(datetime.date(yr, mo, 1))
        mo += 1
        if mo == 13:
            mo, yr = 1, yr + 1
    with open(OUT / "passthrough_synthetic.csv", "w", encoding="utf-8") as fh:
        fh.write("date,er,cpi,output\n")
        for d, a, b, c in zip(dates, er, cpi, out):
            fh.write(f"{d.isoformat()},{a:.10f},{b:.10f},{c:.10f}\n")


def make_bivariate(n=400, seed=777):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y1 = 1.0 + x + rng.standard_normal(n)
    y2 = 1.0 + x + y1 + rng.standard_normal(n)
    with open(OUT / "bivariate_synthetic.csv", "w", encoding="utf-8") as fh:
        fh.write("y1,y2,x\n")
        for a, b, c in zip(y1, y2, x):
            fh.write(f"{a:.12f},{b:.12f},{c:.12f}\n")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    make_passthrough()
    make_bivariate()
    print(f"wrote {OUT / 'passthrough_synthetic.csv'}")
    print(f"wrote {OUT / 'bivariate_synthetic.csv'}")
