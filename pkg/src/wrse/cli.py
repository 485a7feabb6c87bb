"""Command-line entry point: ``wrse {generate,train,eval,sweep,importance}``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
3 malformed data files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiment as E
from .core import DataFormatError

EXIT_RUNTIME, EXIT_CONFIG, EXIT_DATA = 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wrse", description="Weighted resolution survival ensemble benchmark")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "write a synthetic cohort as stays/features files",
        "train": "fit the configured models on every temporal split",
        "eval": "score archived models on the test splits",
        "sweep": "grid over spacing, K and base learner",
        "importance": "gamma-weighted permutation importance of WRSE features",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="JSON experiment config (defaults if omitted)")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
    return p


def _summary_line(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = E.load_config(args.config, {"workers": args.workers, "seed": args.seed, "out": args.out})
        if args.command == "generate":
            print(_summary_line(E.run_generate(cfg)))
        elif args.command == "train":
            timings = E.run_train(cfg)
            print(_summary_line({k: {m: round(v["seconds"], 3) for m, v in t.items()} for k, t in timings.items()}))
        elif args.command == "eval":
            res = E.run_eval(cfg)
            print(E.rows_to_csv(res["rows"]), end="")
        elif args.command == "sweep":
            print(E.rows_to_csv(E.run_sweep(cfg)), end="")
        elif args.command == "importance":
            rep = E.run_importance(cfg)
            for g in sorted(rep.scores):
                print(f"gamma={g:g}")
                print(rep.to_csv(g), end="")
    except E.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
