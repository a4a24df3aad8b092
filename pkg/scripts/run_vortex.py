"""Reversing vortex run for the shape-recovery check; writes results/vortex.json.

usage: python3 scripts/run_vortex.py [--dx 0.014] [--dt 1e-4] [--out results]
"""
import argparse
import json
import os
import sys

from ipmm.suites import vortex_run


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--dx", type=float, default=0.014)
    ap.add_argument("--dt", type=float, default=1e-4)
    ap.add_argument("--t-end", dest="t_end", type=float, default=8.0)
    ap.add_argument("--every", type=int, default=100, help="validation interval in steps")
    ap.add_argument("--out", default="results")
    a = ap.parse_args(argv)
    os.makedirs(a.out, exist_ok=True)
    res = vortex_run(a.dx, a.dt, a.t_end, a.every, log=lambda m: print(m, file=sys.stderr, flush=True))
    with open(os.path.join(a.out, "vortex.json"), "w") as f:
        json.dump(res, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps(res, indent=2, sort_keys=True))
    return 0 if res["status"] == "ok" and not res["final_violations"] else 1


if __name__ == "__main__":
    sys.exit(main())
