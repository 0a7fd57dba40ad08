"""Ratio bands of the interior-estimate probe over dilated test fields."""

import json

from polylap.verify import run_schauder_probe


if __name__ == "__main__":
    report = run_schauder_probe()
    for key, val in sorted(report.metrics.items()):
        if key.startswith("band"):
            print(f"{key:28s} {val:.3f}")
    print(json.dumps({"verdict": report.verdict}))
