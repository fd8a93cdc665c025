"""Command line interface.

Exit codes: 0 success, 2 invalid arguments, 3 cap or evaluation budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .harness import ExperimentConfig, ExperimentKind
from .limits import BudgetExceededError, j_bar
from .perm import Permutation
from .regeneration import CapExceededError
from .sampling import RngStream, sample_mallows
from .subsequence import lcs

EXIT_INVALID = 2
EXIT_CAP = 3


class _UsageError(ValueError):
    pass


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, help="master seed (required for random commands)")
    p.add_argument("--workers", type=int, help="worker threads (does not change results)")
    p.add_argument("--out", help="write results to this path")
    p.add_argument("--format", choices=("csv", "json"), help="output format for --out")
    p.add_argument("--config", help="JSON config file; command-line flags override it")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="mallows-lcs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="draw Mallows permutations")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--count", type=int, default=1)

    p = sub.add_parser("lcs", parents=[common], help="LCS length of two permutations")
    p.add_argument("--a", required=True, help='permutation text, e.g. "3,4,1,2,5"')
    p.add_argument("--b", required=True)
    p.add_argument("--witness", action="store_true", help="also print one common subsequence")

    p = sub.add_parser("jbar", parents=[common], help="evaluate J(beta) by quadrature")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-evaluations", type=int, default=1_000_000, dest="max_evaluations")

    p = sub.add_parser("renewal", parents=[common], help="renewal blocks and CLT parameter estimates")
    p.add_argument("--q", type=float)
    p.add_argument("--qprime", type=float)
    p.add_argument("--blocks", type=int)
    p.add_argument("--csv", help="write per-block rows j,x,y here")

    p = sub.add_parser("weak-law", parents=[common], help="LCS/(n sqrt(1-q)) experiment")
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=float, help="default 1 - 100/n")
    p.add_argument("--replicas", type=int)

    p = sub.add_parser("finite-beta", parents=[common], help="LCS/sqrt(n) at q = 1 - beta/n")
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--replicas", type=int)

    p = sub.add_parser("clt", parents=[common], help="normality of the standardized LCS")
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--qprime", type=float)
    p.add_argument("--replicas", type=int)
    p.add_argument("--blocks", type=int, help="renewal blocks for estimating a and sigma (default scales with n)")

    p = sub.add_parser("stationary", parents=[common], help="product-chain occupation vs stationary law")
    p.add_argument("--q", type=float)
    p.add_argument("--qprime", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--max-sum", type=int, dest="max_sum")
    return parser


_KINDS = {
    "weak-law": ExperimentKind.WEAK_LAW,
    "finite-beta": ExperimentKind.FINITE_BETA,
    "clt": ExperimentKind.CLT,
    "renewal": ExperimentKind.RENEWAL,
    "stationary": ExperimentKind.STATIONARY,
}

_FLAG_TO_FIELD = {
    "n": "n",
    "q": "q",
    "qprime": "q_prime",
    "beta": "beta",
    "replicas": "replicas",
    "seed": "seed",
    "workers": "workers",
    "out": "output_path",
    "blocks": "blocks",
    "steps": "steps",
    "max_sum": "max_sum",
}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    kind = _KINDS[args.command]
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        data.update(loaded.get("config", loaded))
    data["kind"] = kind.value
    for flag, name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[name] = value
    cfg = ExperimentConfig.from_dict(data)
    if cfg.seed is None:
        raise _UsageError("--seed is required (no default seed is used)")
    return cfg.validate()


def _cmd_sample(args, out) -> None:
    if args.seed is None:
        raise _UsageError("--seed is required (no default seed is used)")
    if args.count < 0:
        raise _UsageError("--count must be nonnegative")
    gen = RngStream(args.seed, 0).generator()
    lines = [str(sample_mallows(args.n, args.q, gen)) for _ in range(args.count)]
    _write_text("\n".join(lines) + ("\n" if lines else ""), args.out, out)


def _cmd_lcs(args, out) -> None:
    a, b = Permutation.parse(args.a), Permutation.parse(args.b)
    if args.witness:
        length, witness = lcs(a, b, witness=True)
        text = f"{length}\n{','.join(map(str, witness))}\n"
    else:
        text = f"{lcs(a, b)}\n"
    _write_text(text, args.out, out)


def _cmd_jbar(args, out) -> None:
    res = j_bar(args.beta, args.tol, args.max_evaluations)
    _write_text(f"{res.value!r} {res.abs_error_estimate!r}\n", args.out, out)


def _cmd_experiment(args, out) -> None:
    cfg = config_from_args(args)
    result = harness.run(cfg)
    if getattr(args, "csv", None):
        harness.emit(result, args.csv, "csv")
    if cfg.output_path:
        harness.emit(result, cfg.output_path, args.format or "json")
    out.write(harness.summary_json(result))


def _write_text(text: str, path, out) -> None:
    if path:
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path!r}: {exc}") from exc
    else:
        out.write(text)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"sample": _cmd_sample, "lcs": _cmd_lcs, "jbar": _cmd_jbar}
    try:
        handlers.get(args.command, _cmd_experiment)(args, out)
    except (CapExceededError, BudgetExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return 0


if __name__ == "__main__":
    sys.exit(main())
