"""Command-line front end.

Exit codes: 0 success / equivalent / stable, 1 not equivalent / violations
found, 2 usage or input errors (message on stderr).
"""

from __future__ import annotations

import argparse
import sys

from . import equiv, kripke, lts as lts_mod, modal

EXIT_OK, EXIT_NO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _listing(states) -> str:
    return " ".join(map(str, sorted(states)))


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def cmd_check(args, out):
    l1 = lts_mod.read_aut(args.f1)
    if args.f2 is not None:
        if args.pair is not None:
            raise UsageError("--pair cannot be combined with a second file")
        l2 = lts_mod.read_aut(args.f2)
        system = lts_mod.disjoint_union(l1, l2)
        s, t = l1.initial, l1.num_states + l2.initial
    else:
        if args.pair is None:
            raise UsageError("give a second file or --pair S T")
        system = l1
        s, t = args.pair
        for x in (s, t):
            if not 0 <= x < system.num_states:
                raise UsageError(f"state {x} out of range [0, {system.num_states})")
    same = equiv.check(system, s, t, args.variant)
    print("equivalent" if same else "not-equivalent", file=out)
    if args.explain and not same and equiv.Variant(args.variant) is equiv.Variant.DPBB:
        print(modal.format_phi(modal.distinguishing_formula(system, s, t)), file=out)
    return EXIT_OK if same else EXIT_NO


def cmd_minimize(args, out):
    system = lts_mod.read_aut(args.file)
    p = equiv.partition(system, args.variant)
    _write(args.output, lts_mod.write_aut(lts_mod.quotient(system, p)))
    print(f"states: {system.num_states} blocks: {p.num_blocks}", file=out)
    return EXIT_OK


def cmd_divergent(args, out):
    print(_listing(lts_mod.divergent_states(lts_mod.read_aut(args.file))), file=out)
    return EXIT_OK


def cmd_translate(args, out):
    system = lts_mod.read_aut(args.file)
    if args.mode == "dv":
        ks = kripke.translate_dv(system)
    else:
        ks = kripke.translate_deadlock_preserving(system)
    _write(args.output, kripke.write_kripke(ks))
    return EXIT_OK


def cmd_mc_phi(args, out):
    system = lts_mod.read_aut(args.file)
    print(_listing(modal.eval_phi(system, modal.parse_phi(args.formula))), file=out)
    return EXIT_OK


def cmd_mc_ctl(args, out):
    ks = kripke.read_kripke(args.file)
    print(_listing(kripke.eval_ctl(ks, kripke.parse_ctl(args.formula))), file=out)
    return EXIT_OK


def cmd_par(args, out):
    product = lts_mod.parallel_compose(lts_mod.read_aut(args.f1), lts_mod.read_aut(args.f2))
    _write(args.output, lts_mod.write_aut(product))
    return EXIT_OK


def cmd_verify(args, out):
    system = lts_mod.read_aut(args.file)
    with open(args.partition, encoding="ascii") as fh:
        p = lts_mod.parse_partition(fh.read(), system.num_states)
    violations = equiv.verify(system, p, args.variant)
    if not violations:
        print("stable", file=out)
        return EXIT_OK
    for v in violations:
        print(v, file=out)
    return EXIT_NO


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpbb", description="Branching bisimilarity toolkit for .aut systems.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="compare two states")
    p.add_argument("f1")
    p.add_argument("f2", nargs="?")
    p.add_argument("--variant", choices=[v.value for v in equiv.Variant], default="dpbb")
    p.add_argument("--pair", nargs=2, type=int, metavar=("S", "T"))
    p.add_argument("--explain", action="store_true", help="print a distinguishing formula (dpbb)")
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("minimize", help="write the quotient")
    p.add_argument("file")
    p.add_argument("--variant", choices=["bb", "dpbb", "dsbb"], default="dpbb")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(run=cmd_minimize)

    p = sub.add_parser("divergent", help="list divergent states")
    p.add_argument("file")
    p.set_defaults(run=cmd_divergent)

    p = sub.add_parser("translate", help="translate to a Kripke structure")
    p.add_argument("file")
    p.add_argument("--mode", choices=["dv", "deadlock-preserving"], required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(run=cmd_translate)

    p = sub.add_parser("mc-phi", help="states satisfying a modal formula")
    p.add_argument("file")
    p.add_argument("--formula", required=True)
    p.set_defaults(run=cmd_mc_phi)

    p = sub.add_parser("mc-ctl", help="states of a Kripke structure satisfying a CTL formula")
    p.add_argument("file")
    p.add_argument("--formula", required=True)
    p.set_defaults(run=cmd_mc_ctl)

    p = sub.add_parser("par", help="interleaving parallel composition")
    p.add_argument("f1")
    p.add_argument("f2")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(run=cmd_par)

    p = sub.add_parser("verify", help="check a partition against the definition")
    p.add_argument("file")
    p.add_argument("--partition", required=True)
    p.add_argument("--variant", choices=["bb", "dpbb"], default="dpbb")
    p.set_defaults(run=cmd_verify)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.run(args, out)
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except (ValueError, IndexError, OverflowError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
