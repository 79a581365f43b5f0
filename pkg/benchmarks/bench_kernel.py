"""Compiled vs pure-Python kernel on the case-study hot paths.

    python benchmarks/bench_kernel.py [--repeat N]

Each backend runs in its own interpreter (the kernel is chosen at import).
"""

import argparse
import json
import os
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"

WORKER = r"""
import json, sys, time
from causal_audit.accountability import NormMap, check_necessity
from causal_audit.cause import actual_causes, lamport_causes
from causal_audit.dsl import parse_document
from causal_audit.kernel import BACKEND
from causal_audit.logs import load_log
from causal_audit.properties import property_from_block
from causal_audit.semantics import replay_log

fix, repeat = sys.argv[1], int(sys.argv[2])
doc = parse_document(open(f"{fix}/notaries_actual.proto").read())
norm = parse_document(open(f"{fix}/notaries_norm.proto").read())
p = property_from_block(doc.prop)
cfg = doc.config
log = load_log(f"{fix}/notaries_log.json")


def best(fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


t = replay_log(cfg, log)
lc = lamport_causes(cfg, t, p)[0]
out = {
    "backend": BACKEND,
    "replay": best(lambda: replay_log(cfg, log)),
    "phase1": best(lambda: lamport_causes(cfg, t, p)),
    "phase2_exact": best(lambda: actual_causes(cfg, lc, p, "exact")),
    "phase2_greedy": best(lambda: actual_causes(cfg, lc, p, "greedy")),
    "necessity": best(lambda: check_necessity(norm.config.threads, NormMap.from_config(norm.config), norm.config.stores, p)),
}
print(json.dumps(out))
"""


def run(pure: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("CAUSAL_AUDIT_PURE", None)
    if pure:
        env["CAUSAL_AUDIT_PURE"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(FIX), str(repeat)], capture_output=True, text=True, env=env, check=True)
    return json.loads(proc.stdout)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args()
    rows = [run(False, args.repeat), run(True, args.repeat)]
    keys = [k for k in rows[0] if k != "backend"]
    print(f"{'task':<15}" + "".join(f"{r['backend']:>12}" for r in rows) + f"{'speedup':>10}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{k:<15}{a:>11.3f}s{b:>11.3f}s{b / a if a else float('nan'):>9.2f}x")


if __name__ == "__main__":
    main()
