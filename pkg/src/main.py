import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from src import __version__, commands
from src.errors import ConfigError, ParameterError, UsageError
from src.stats import HISTOGRAM_BINS

logger = logging.getLogger("src.main")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def configure_logging() -> None:
    level = os.environ.get("ECCPOW_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eccpow-sim", description="ECCPoW consensus library and simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine-bench", help="mine blocks at a fixed level with the real decoder")
    p.add_argument("--level", type=int, required=True, help="difficulty table index")
    p.add_argument("--blocks", type=int, default=300)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="run the discrete-event network simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override rng_seed from the config")
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze", help="histogram, exponential fit and AD test of a sample file")
    p.add_argument("samples")
    p.add_argument("--out", required=True)
    p.add_argument("--column", default="bgt_ms")
    p.add_argument("--reference", choices=("exponential", "geometric"), default="exponential")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=HISTOGRAM_BINS)
    p.add_argument("--prefix-step", type=int, default=100)

    p = sub.add_parser("adtest", help="two-sample Anderson-Darling test of two sample files")
    p.add_argument("f")
    p.add_argument("g")
    p.add_argument("--right-continuous", action="store_true", help="rank ties right-continuously")

    p = sub.add_parser("pcm", help="print the parity-check matrix for a seed")
    p.add_argument("seed", help="32-byte seed as hex, optional 0x prefix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--wc", type=int, required=True)
    p.add_argument("--wr", type=int, required=True)

    p = sub.add_parser("build-table", help="estimate the default difficulty table")
    p.add_argument("--out", required=True, help="table file to write (YAML)")
    p.add_argument("--trials", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("ad-examples", help="AD test on known distribution pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 30])
    return parser


def run(args: argparse.Namespace) -> None:
    if args.command == "mine-bench":
        commands.cmd_mine_bench(args.level, args.blocks, args.threads, args.seed, args.out)
    elif args.command == "simulate":
        summary = commands.cmd_simulate(args.config, args.out, rng_seed=args.seed)
        print(json.dumps(summary, indent=2, sort_keys=True))
    elif args.command == "analyze":
        analysis = commands.cmd_analyze(
            args.samples,
            args.out,
            column=args.column,
            reference=args.reference,
            rng_seed=args.seed,
            bins=args.bins,
            prefix_step=args.prefix_step,
        )
        analysis.pop("histogram")
        print(json.dumps(analysis, indent=2, sort_keys=True))
    elif args.command == "adtest":
        result = commands.cmd_adtest(args.f, args.g, midrank=not args.right_continuous)
        print(json.dumps(result.report(), indent=2))
    elif args.command == "pcm":
        sys.stdout.write(commands.cmd_pcm(args.seed, args.n, args.wc, args.wr))
    elif args.command == "build-table":
        commands.cmd_build_table(args.out, args.trials, args.seed, args.threads)
    elif args.command == "ad-examples":
        frame = commands.cmd_ad_examples(args.out, args.seed, args.sizes)
        print(frame.to_string(index=False))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        run(args)
    except (UsageError, ConfigError, ParameterError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except Exception:
        logger.exception("%s failed", args.command)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
