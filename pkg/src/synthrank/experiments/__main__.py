"""``python -m synthrank.experiments run <scenario>``"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .. import canonical
from .scenarios import SCENARIOS, run_scenario


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="synthrank-experiments", description="Run reproduction scenarios.")
    sub = parser.add_subparsers(dest="cmd", required=True)
    sub.add_parser("list", help="list scenario names")
    run = sub.add_parser("run", help="run one scenario, or all")
    run.add_argument("scenario", choices=[*SCENARIOS, "all"])
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", type=Path, default=Path("reports"), help="directory for JSON and markdown reports")
    args = parser.parse_args(argv)

    if args.cmd == "list":
        print("\n".join(SCENARIOS))
        return 0
    names = list(SCENARIOS) if args.scenario == "all" else [args.scenario]
    args.out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for name in names:
        report = run_scenario(name, args.seed)
        (args.out / f"{name}.json").write_text(canonical.dumps(report.to_json()) + "\n", encoding="utf-8")
        (args.out / f"{name}.md").write_text(report.to_markdown(), encoding="utf-8")
        ok = sum(c.ok for c in report.checks)
        print(f"{name}: {'PASS' if report.passed else 'FAIL'} ({ok}/{len(report.checks)} checks)")
        failed += not report.passed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
