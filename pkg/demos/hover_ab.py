"""Hover with and without disturbance compensation.

Run with ``python demos/hover_ab.py``. Simulates the 110 s four-phase hover
experiment with compensation switched on at 55.5 s and prints the off/on error
table over matched windows (same arm motion, compensation off versus on).
"""

from __future__ import annotations

from aerialmanip.config import default_config
from aerialmanip.report import ab_report, format_ab
from aerialmanip.simulator import run_scenario


def main() -> None:
    cfg = default_config()
    sol = cfg.gains()
    log = run_scenario(cfg.scenario(sol.K))
    rows = ab_report(log, cfg.metric_windows())
    print(format_ab(rows))
    for r in rows:
        print(f"off {r.off_window} vs on {r.on_window}: x ratio {r.ratio[0]:.3f}, y ratio {r.ratio[1]:.3f}")
    print(f"saturated cycles {int(log.saturated.sum())}, clamped allocations {int(log.allocation_clamped.sum())}")


if __name__ == "__main__":
    main()
