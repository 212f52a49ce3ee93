"""``igac`` command line: ``study``, ``verify`` and ``list``.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .errors import ContractError, IgacError
from .problems import BUILTIN_PROBLEMS
from .study import StudyConfig, format_csv, load_config, run_study

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_NUMERICAL"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="igac", description="Isogeometric collocation refinement studies.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    st = sub.add_parser("study", help="run a refinement study and write its convergence table")
    st.add_argument("--problem", choices=BUILTIN_PROBLEMS)
    st.add_argument("--kmax", type=int, dest="k_max", help="finest refinement index (>= 3)")
    st.add_argument("--samples", type=int, help="samples per knot interval per direction (>= 4)")
    st.add_argument("--seed", type=int)
    st.add_argument("--out", help="output directory; without it the CSV goes to stdout")
    st.add_argument("--bounds", action="store_true", default=None, help="measure the consistency bounds")
    st.add_argument("--norms", action="store_true", default=None, help="estimate operator norms per level")
    st.add_argument("--scheme", choices=("greville", "uniform"), help="collocation points (default greville)")
    st.add_argument("--timing", action="store_true", default=None, help="write measured wall_ms (not reproducible)")
    st.add_argument("--config", help="INI file with a [study] section; flags override it")

    vf = sub.add_parser("verify", help="run the invariant suite on small instances")
    vf.add_argument("--seed", type=int, default=0)

    sub.add_parser("list", help="print the built-in problem names")
    return parser


def _study_config(args) -> StudyConfig:
    settings = load_config(args.config) if args.config else {}
    for key in ("problem", "k_max", "samples", "seed", "out", "bounds", "norms", "scheme", "timing"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    if "problem" not in settings:
        raise UsageError("igac study: --problem is required")
    if "k_max" not in settings:
        raise UsageError("igac study: --kmax is required")
    return StudyConfig(**settings)


def _cmd_study(args, out, err) -> int:
    config = _study_config(args)
    result = run_study(config)
    if config.out:
        print(f"wrote {config.out}/convergence.csv", file=out)
        print(f"verdict: {result.verdict}", file=out)
    else:
        out.write(format_csv(result.records, config.timing))
        if result.bounds:
            print(json.dumps([b.to_dict() for b in result.bounds], indent=2, default=str), file=err)
        print(f"verdict: {result.verdict}", file=err)
    return EXIT_OK


def _cmd_verify(args, out, err) -> int:
    from .verify import run_checks

    results = run_checks(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:34s} {r.detail}  ({r.seconds:.2f} s)", file=out)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed", file=out)
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        if args.command == "list":
            for name in BUILTIN_PROBLEMS:
                print(name, file=out)
            return EXIT_OK
        if args.command == "verify":
            return _cmd_verify(args, out, err)
        return _cmd_study(args, out, err)
    except (UsageError, ContractError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except IgacError as exc:
        print(f"numerical failure: {exc}", file=err)
        return EXIT_NUMERICAL
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
