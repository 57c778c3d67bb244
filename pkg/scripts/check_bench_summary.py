"""Cross-check a bench directory: summary.json rates against the record CSVs."""

import json
import sys
from pathlib import Path

from d4orm.bench import recompute_success_rates


def main(directory):
    d = Path(directory)
    summary = json.loads((d / "summary.json").read_text())
    recomputed = recompute_success_rates(d)
    bad = 0
    for key in sorted(set(summary) | set(recomputed)):
        stored = summary.get(key, {}).get("success_rate")
        again = recomputed.get(key)
        flag = "ok" if stored == again else "MISMATCH"
        bad += flag != "ok"
        print(f"{key}: summary={stored} csv={again} {flag}")
    return 1 if bad else 0


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit("usage: check_bench_summary.py BENCH_DIR")
    sys.exit(main(sys.argv[1]))
