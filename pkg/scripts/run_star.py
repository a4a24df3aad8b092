"""Pulsating star run with every-step validation; writes results/star.json.

usage: python3 scripts/run_star.py [--dx 0.1] [--dt 2e-4] [--out results]
"""
import argparse
import json
import os
import sys

from ipmm.suites import star_run


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--dx", type=float, default=0.1)
    ap.add_argument("--dt", type=float, default=2e-4)
    ap.add_argument("--t-end", dest="t_end", type=float, default=3.0)
    ap.add_argument("--validate", default="every-step", choices=("off", "sparse", "every-step"))
    ap.add_argument("--out", default="results")
    a = ap.parse_args(argv)
    os.makedirs(a.out, exist_ok=True)
    res = star_run(a.dx, a.dt, a.t_end, validate=a.validate,
                   log=lambda m: print(m, file=sys.stderr, flush=True))
    with open(os.path.join(a.out, "star.json"), "w") as f:
        json.dump(res, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps(res, indent=2, sort_keys=True))
    return 0 if res["status"] == "ok" else 1


if __name__ == "__main__":
    sys.exit(main())
