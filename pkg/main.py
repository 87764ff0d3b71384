import argparse
import logging
import sys
from typing import List, Optional

from config import CONFIG


def setup_logging():
    handlers = [logging.StreamHandler(sys.stdout)]
    if CONFIG.LOG_FILE:
        handlers.append(logging.FileHandler(CONFIG.LOG_FILE, encoding='utf-8'))
    logging.basicConfig(
        level=getattr(logging, CONFIG.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
    )


logger = logging.getLogger(__name__)


def handle_exception(exc_type, exc_value, exc_traceback):
    """Log anything that escapes main() before the interpreter exits."""
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return

    logger.critical("❌ unhandled error:", exc_info=(exc_type, exc_value, exc_traceback))


def print_banner():
    banner = """
🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯
📐 Strip eigenvalue bounds: Orlicz estimates vs negative-eigenvalue counts
🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯🎯
"""
    print(banner)


def parse_alphas(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--alphas must be comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Eigenvalue bounds for Schrödinger operators in a strip")
    sub = parser.add_subparsers(dest='command', required=True)

    compute = sub.add_parser('compute', help="evaluate every bound and count for a case file")
    compute.add_argument('--config', required=True)
    compute.add_argument('--format', choices=('json', 'csv'))
    compute.add_argument('--out')

    scan = sub.add_parser('scan', help="negative counts for increasing coupling")
    scan.add_argument('--config', required=True)
    scan.add_argument('--alphas', type=parse_alphas, required=True)

    certify = sub.add_parser('certify', help="certified lower bound from disjoint trial functions")
    certify.add_argument('--config', required=True)

    oracle = sub.add_parser('oracle', help="brute-force oracle suites")
    oracle.add_argument('--suite', choices=('orlicz', 'inertia'), required=True)
    oracle.add_argument('--cases', type=int)
    oracle.add_argument('--seed', type=int, default=0)
    return parser


def run_compute(args) -> int:
    from case import load_case
    from report import emit_report, run_case

    config = load_case(args.config)
    report = run_case(config)
    path = emit_report(report, args.format or config.output_format, args.out or config.output_dir)
    print(report.summary())
    print(f"📄 {path}")
    return 0 if report.unconditional_pass else 1


def run_scan(args) -> int:
    from case import load_case
    from report import scan_case

    config = load_case(args.config)
    rows = scan_case(config, args.alphas)
    print(f"📊 α-scan for {config.name}")
    for row in rows:
        print(f"• α = {row.alpha:g}: N = {row.count}, N/α = {row.count_per_alpha:.4g}, "
              f"‖G(αV)‖ = {row.weak_quasinorm:.4g}")
    counts = [row.count for row in rows]
    monotone = all(b >= a for a, b in zip(counts, counts[1:]))
    print("✅ counts nondecreasing" if monotone else "❌ counts not monotone in α")
    return 0 if monotone else 1


def run_certify(args) -> int:
    from case import load_case
    from errors import CaseError
    from strip_solver import assemble_form, certify_lower_bound, count_negative

    config = load_case(args.config)
    if config.kind != 'volume':
        raise CaseError(f"{config.name}: the trial-function certifier needs a volume potential")
    V = config.potential
    certifier = certify_lower_bound(V, config.quadrature, config.n_range)
    count = count_negative(assemble_form(V, config.grid, 1.0))
    print(f"🎯 {config.name}: threshold {certifier.threshold:.6g}")
    print(f"• candidate windows: {certifier.indices}")
    print(f"• disjoint packing: {certifier.packing}")
    print(f"• certified lower bound {certifier.lower_bound} (⌈card/3⌉ = {certifier.ceil_third})")
    print(f"• numeric count {count}")
    if certifier.truncated:
        print("⚠️ trial windows reached the edge of the index range")
    holds = certifier.lower_bound <= count
    print("✅ lower bound consistent" if holds else "❌ lower bound exceeds the numeric count")
    return 0 if holds else 1


def run_oracle(args) -> int:
    from oracles import SUITES

    suite = SUITES[args.suite]
    result = suite(args.cases, args.seed) if args.cases is not None else suite(seed=args.seed)
    print(f"📊 {result.suite}: {result.cases} cases, {len(result.failures)} failures, worst {result.worst:.2e}")
    for failure in result.failures:
        print(f"❌ {failure}")
    return 0 if result.passed else 1


COMMANDS = {'compute': run_compute, 'scan': run_scan, 'certify': run_certify, 'oracle': run_oracle}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()
    sys.excepthook = handle_exception
    print_banner()

    from errors import SpectralError
    try:
        return COMMANDS[args.command](args)
    except SpectralError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
