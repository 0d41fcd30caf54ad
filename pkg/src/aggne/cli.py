"""Command line entry point ``gne``.

Exit codes: 0 success, 1 other failure, 2 certification failure,
3 numerical failure.
"""

import argparse
import sys

import yaml

from . import harness
from .errors import CertificationError, ConfigError, GNEError, NumericalError

EXIT_OK, EXIT_FAIL, EXIT_CERT, EXIT_NUMERIC = 0, 1, 2, 3


def _print_yaml(obj):
    sys.stdout.write(yaml.safe_dump(harness._plain(obj), sort_keys=False,
                                    default_flow_style=None))


def cmd_certify(args):
    scn = harness.load_scenario(args.config)
    report, params = harness.certify_scenario(scn)
    _print_yaml({"scenario": scn.name, "c": params.c, "kappa_inv": 1.0 / params.kappa,
                 "certificate": report.as_dict()})
    return EXIT_OK if report.passed else EXIT_CERT


def cmd_run(args):
    scn = harness.load_scenario(args.config)
    bundle = harness.run_scenario(scn, out_dir=args.output)
    _print_yaml(bundle.summary)
    for err in bundle.errors:
        print(f"error in stage {err['stage']}: {err['type']}: {err['message']}", file=sys.stderr)
    return bundle.exit_code()


def cmd_reference(args):
    scn = harness.load_scenario(args.config)
    _print_yaml(harness.reference_summary(scn))
    return EXIT_OK


def cmd_verify(args):
    scn = harness.load_scenario(args.config)
    checks = harness.verify_scenario(scn)
    width = max(len(c["check"]) for c in checks)
    print(f"{'check':<{width}}  {'value':>12}  {'limit':>12}  result")
    for c in checks:
        print(f"{c['check']:<{width}}  {c['value']:>12.3e}  {c['limit']:>12.3e}  "
              f"{'PASS' if c['passed'] else 'FAIL'}")
    return EXIT_OK if all(c["passed"] for c in checks) else EXIT_FAIL


def cmd_compare(args):
    comp = harness.compare(args.bundles)
    sys.stdout.write(comp.to_text())
    if args.output:
        comp.to_csv(args.output)
    return EXIT_OK


def cmd_spectrum(args):
    scn = harness.load_scenario(args.config)
    _print_yaml(harness.spectrum(scn))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gne", description="Distributed GNE seeking experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="check step sizes against the convergence certificate")
    p.add_argument("config")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("run", help="run a scenario and write its report bundle")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reference", help="solve for the variational GNE with full information")
    p.add_argument("config")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("verify", help="run the operator-splitting checks")
    p.add_argument("config")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="align error series of report bundles")
    p.add_argument("bundles", nargs="+")
    p.add_argument("-o", "--output", help="write the aligned table as CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("spectrum", help="print Laplacian spectral data")
    p.add_argument("config")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except GNEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
