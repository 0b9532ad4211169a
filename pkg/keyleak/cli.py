"""
KeyLeak CLI

    python -m keyleak construct kpa --n 8 --m 4 > kpa.json
    python -m keyleak analyze kpa.json --format markdown
    python -m keyleak bound individual_guarantee epsilon=1e-9
    python -m keyleak verify --sweep subset_leak --instances 200
    python -m keyleak simulate lfsr --seed-bits 8 --length 32
    python -m keyleak report --mode table --config params.env

Exit codes: 0 success, 1 a valid bound was violated, 2 input error.
"""
import argparse
import inspect
import logging
import sys
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from . import __version__
from .bounds import BOUND_REGISTRY
from .config import build_run_config
from .constructions import (
    ber_counterexample_search,
    biased_bits_distribution,
    kpa_counterexample,
    saturating_distribution,
    spike_mixture,
    spiked_distribution,
)
from .distributions import (
    KeyDistribution,
    distribution_document,
    dump_distribution,
    load_distribution,
)
from .exceptions import KeyLeakError, ParameterRangeError
from .models import LeakModel, ProtocolParams, RunConfig, SimulationResult
from .oracle import SWEEPS, mac_attack_search, verify_suite
from .pipeline import DAY_SECONDS, leak_projection, net_key_rate, required_d
from .primitives import (
    LfsrSpec,
    MacFamily,
    ToeplitzMatrix,
    format_bits,
    lfsr_keystream,
    lfsr_period,
    mac_epsilon,
    mac_impersonation_success,
    otp_decrypt,
    otp_encrypt,
    toeplitz_hash,
)
from .reports import analyze_distribution, render, statement_f_analysis, table_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT_ERROR = 2

CONSTRUCT_KINDS = ("kpa", "saturating", "spiked", "uniform", "point", "biased", "spike-mixture", "ber-search")
SIMULATE_TARGETS = ("otp", "toeplitz", "lfsr", "mac")
REPORT_MODES = ("table", "statement-f", "required-d", "projection", "net-rate")

# Default operating points when no config file names params sets
DEFAULT_PARAMS_SETS = [
    ProtocolParams(name="theory", block_len=100_000, d_level=1e-9, key_rate=1e7),
    ProtocolParams(name="experiment", block_len=100_000, d_level=4e-9, key_rate=1.4e5),
]


# =============================================================================
# ARGUMENT PARSING
# =============================================================================

def _positions(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key-value config file; dotted keys define params sets")
    common.add_argument("--seed", type=int, help="seed for every randomized step")
    common.add_argument("--exact", action=argparse.BooleanOptionalAction, default=None,
                        help="exact rational arithmetic (--no-exact for doubles)")
    common.add_argument("--workers", type=int, help="worker processes for sweeps")
    common.add_argument("--out", dest="output", help="write output to this file instead of stdout")
    common.add_argument("--format", dest="output_format", choices=("json", "csv", "markdown"))
    common.add_argument("--markdown", action="store_true", help="shorthand for --format markdown")
    common.add_argument("--log-level", help="logging level (default from KEYLEAK_LOG_LEVEL)")
    return common


def _first_line(text: Optional[str]) -> str:
    lines = (text or "").strip().splitlines()
    return lines[0] if lines else ""


def _bound_epilog() -> str:
    lines = ["bounds (* takes --distribution):"]
    for name in sorted(BOUND_REGISTRY):
        evaluator = BOUND_REGISTRY[name]
        marker = "*" if "P" in inspect.signature(evaluator).parameters else " "
        lines.append(f"  {marker} {name:<26} {_first_line(evaluator.__doc__)}")
    return "\n".join(lines)


def _verify_epilog() -> str:
    lines = []
    for kind in ("soundness", "refutation"):
        lines.append(f"{kind} sweeps:")
        lines.extend(f"  {name:<16} {spec.summary}" for name, spec in SWEEPS.items() if spec.kind == kind)
    return "\n".join(lines)


CONSTRUCT_EPILOG = """\
kinds:
  kpa            known prefix k1 fixes the remainder with certainty; average leak stays at 2^-|K2| + d
  saturating     subset guess meets 2^-|K*| + d with equality
  spiked         one key at 2^-l, the rest uniform: min-entropy l
  uniform        perfect key
  point          known key
  biased         independent bits, each 0 with the given probability
  spike-mixture  (1 - lam) uniform + lam point mass
  ber-search     distribution within d whose BER beats (1 - d)/2"""

SIMULATE_EPILOG = """\
targets:
  otp       one-time pad: y = x xor k, perfect secrecy with a uniform key
  toeplitz  linear hashing of a key by a random Toeplitz matrix
  lfsr      Fibonacci LFSR running key; whole-key leak 2^-seed_bits
  mac       polynomial-evaluation MAC over GF(2^b): exact epsilon, optional spiked-key attack"""

REPORT_EPILOG = """\
modes:
  table        whole-block compromise, leaks per day and security bits for each comparison case
  statement-f  per-bit failure statement against the correct leak projection
  required-d   d level needed to keep the horizon failure below --target
  projection   expected block and bit leaks per day under --model
  net-rate     key rate left after the error-correction leak"""

ANALYZE_EPILOG = """\
dossier: n, p1, d to uniform, entropy, information leak, optimal BER, top of the
ordered profile and every applicable bound with its slack"""


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="keyleak",
        description="Exact leak analysis for imperfect secret keys: bounds, counter-examples and brute-force checks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Commands")
    raw = argparse.RawDescriptionHelpFormatter

    # Construct a distribution
    construct = subparsers.add_parser(
        "construct", parents=[common], formatter_class=raw, epilog=CONSTRUCT_EPILOG,
        help="Build a counter-example or reference key distribution and write it as JSON",
    )
    construct.add_argument("kind", choices=CONSTRUCT_KINDS)
    construct.add_argument("--n", type=int, default=8, help="key length in bits")
    construct.add_argument("--m", type=int, help="known prefix length (kpa)")
    construct.add_argument("--l", type=int, help="spike entropy level (spiked)")
    construct.add_argument("--k0", type=int, default=0, help="spike key")
    construct.add_argument("--key", type=int, default=0, help="point-mass key")
    construct.add_argument("--positions", type=_positions, help="comma-separated bit positions (saturating)")
    construct.add_argument("--delta", help="target distance, number or a/b (saturating)")
    construct.add_argument("--subset-value", type=int, default=0, help="saturated subset value")
    construct.add_argument("--bias", help="probability of each bit being 0 (biased)")
    construct.add_argument("--lam", help="spike weight (spike-mixture)")
    construct.add_argument("--d", type=float, help="distance budget (ber-search)")

    # Evaluate a bound
    bound = subparsers.add_parser(
        "bound", parents=[common], formatter_class=raw, epilog=_bound_epilog(),
        help="Evaluate one closed-form bound, e.g. subset_leak_bound subset_len=8 delta=1e-9",
    )
    bound.add_argument("name", choices=sorted(BOUND_REGISTRY))
    bound.add_argument("arguments", nargs="*", help="key=value pairs; lists as 1,2,3, fractions as a/b")
    bound.add_argument("--distribution", help="distribution file for bounds that take one")

    # Verification sweeps
    verify = subparsers.add_parser(
        "verify", parents=[common], formatter_class=raw, epilog=_verify_epilog(),
        help="Check every bound against brute force and confirm the incorrect formulas fail",
    )
    verify.add_argument("--sweep", action="append", choices=sorted(SWEEPS), help="run only these sweeps")
    verify.add_argument("--instances", type=int, help="random instances per sweep")
    verify.add_argument("--bits", type=int, help="key length of the sweep distributions")

    # Primitive simulation
    simulate = subparsers.add_parser(
        "simulate", parents=[common], formatter_class=raw, epilog=SIMULATE_EPILOG,
        help="Run a primitive: one-time pad, Toeplitz hash, LFSR keystream or polynomial MAC",
    )
    simulate.add_argument("target", choices=SIMULATE_TARGETS)
    simulate.add_argument("--message", help="bit string (otp plaintext, toeplitz input)")
    simulate.add_argument("--key", help="bit string key (otp)")
    simulate.add_argument("--rows", type=int, help="output bits (toeplitz)")
    simulate.add_argument("--seed-bits", type=int, default=8, help="LFSR degree")
    simulate.add_argument("--state", type=int, default=1, help="LFSR seed state")
    simulate.add_argument("--length", type=int, default=32, help="keystream length")
    simulate.add_argument("--block-bits", type=int, default=3, help="MAC block size b")
    simulate.add_argument("--blocks", type=int, default=2, help="MAC message blocks c")
    simulate.add_argument("--spike", type=int, help="attack a spiked MAC key at this entropy level")

    # Reports
    report = subparsers.add_parser(
        "report", parents=[common], formatter_class=raw, epilog=REPORT_EPILOG,
        help="Leak projections, the comparison table and required d levels",
    )
    report.add_argument("--mode", choices=REPORT_MODES, default="table")
    report.add_argument("--model", choices=[m.value for m in LeakModel], default=LeakModel.INDIVIDUAL.value)
    report.add_argument("--target", type=float, default=1e-15, help="failure target (required-d)")
    report.add_argument("--horizon", type=float, default=DAY_SECONDS, help="horizon in seconds (required-d)")
    report.add_argument("--blocks", type=float, help="blocks in the horizon (required-d)")
    report.add_argument("--per-bit-level", type=float, default=1e-24, help="per-bit level (statement-f)")
    report.add_argument("--block-len", type=int, default=1_000_000, help="block length (statement-f)")
    report.add_argument("--key-rate", type=float, default=1e6, help="key rate in bits/s (statement-f)")
    report.add_argument("--constants", choices=("bound", "leading-order"), default="bound",
                        help="guarantee constants for projections")
    report.add_argument("--systematic", action="store_true", help="systematic-code leak (net-rate)")

    # Dossier
    analyze = subparsers.add_parser(
        "analyze", parents=[common], formatter_class=raw, epilog=ANALYZE_EPILOG,
        help="Load a distribution file and emit its metrics and bound dossier",
    )
    analyze.add_argument("file", help="distribution JSON")

    return parser


# Per-command arguments forwarded to RunConfig.options
_COMMON_DESTS = {"command", "config", "seed", "exact", "workers", "output", "output_format", "markdown", "log_level"}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = vars(args)
    options = {key: value for key, value in values.items() if key not in _COMMON_DESTS}
    inputs = [options["file"]] if options.get("file") else []
    overrides: Dict[str, Any] = {
        "seed": args.seed,
        "exact": args.exact,
        "workers": args.workers,
        "output": args.output,
        "output_format": "markdown" if args.markdown else args.output_format,
        "log_level": args.log_level,
        "options": options,
        "inputs": inputs,
    }
    if args.command == "verify":
        overrides["sweep_instances"] = options.get("instances")
        overrides["sweep_bits"] = options.get("bits")
    return build_run_config(args.command, overrides, config_path=args.config)


# =============================================================================
# COMMANDS
# =============================================================================

def _construct(config: RunConfig) -> str:
    opts = config.options
    kind = opts["kind"]
    n = opts["n"]
    exact = config.exact
    if kind == "kpa":
        P = kpa_counterexample(n, opts.get("m") or n // 2, k0=opts["k0"], exact=exact)
    elif kind == "saturating":
        positions = opts.get("positions") or [0]
        P = saturating_distribution(n, positions, opts.get("delta") or "1/10", opts["subset_value"], exact=exact)
    elif kind == "spiked":
        P = spiked_distribution(n, opts.get("l") or n // 2, k0=opts["k0"], exact=exact)
    elif kind == "uniform":
        P = KeyDistribution.uniform(n, exact=exact)
    elif kind == "point":
        P = KeyDistribution.point_mass(n, opts["key"], exact=exact)
    elif kind == "biased":
        P = biased_bits_distribution(n, opts.get("bias") or "3/5", exact=exact)
    elif kind == "spike-mixture":
        P = spike_mixture(n, opts.get("lam") or "1/10", k0=opts["k0"], exact=exact)
    else:
        d = opts.get("d") if opts.get("d") is not None else 0.1
        P = ber_counterexample_search(n, d, seed=config.seed, budget=config.search_budget)
        if P is None:
            logger.warning(f"No BER counter-example found for n={n}, d={d}")
            return "null\n"
    logger.info(f"Constructed {kind} distribution: {P!r}")
    if config.output_format == "json":
        return dump_distribution(P) + "\n"
    return render(distribution_document(P), config.output_format, title=f"{kind} distribution")


def _coerce(value: str) -> Any:
    if "," in value:
        return [_coerce(part) for part in value.split(",") if part]
    if "/" in value:
        return Fraction(value)
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def _bound(config: RunConfig) -> str:
    opts = config.options
    kwargs: Dict[str, Any] = {}
    for item in opts.get("arguments") or []:
        if "=" not in item:
            raise ParameterRangeError(f"bound argument '{item}' is not key=value")
        key, value = item.split("=", 1)
        kwargs[key.strip()] = _coerce(value.strip())
    evaluator = BOUND_REGISTRY[opts["name"]]
    if opts.get("distribution"):
        if "P" not in inspect.signature(evaluator).parameters:
            raise ParameterRangeError(f"{opts['name']} does not take a distribution")
        kwargs["P"] = load_distribution(opts["distribution"], exact=config.exact)
    try:
        result = evaluator(**kwargs)
    except TypeError as e:
        raise ParameterRangeError(f"bad arguments for {opts['name']}: {e}") from e
    if result.is_flagged:
        logger.warning(f"{result.formula} is an incorrect formula, shown for comparison only")
    return render(result, config.output_format, title=opts["name"])


def _verify(config: RunConfig) -> Tuple[str, int]:
    reports = verify_suite(
        names=config.options.get("sweep"),
        instances=config.sweep_instances,
        seed=config.seed,
        bits=config.sweep_bits,
        workers=config.workers,
        subset_budget=config.subset_budget,
    )
    failed = [r.bound_name for r in reports if r.failed]
    if failed:
        logger.error(f"Bound violations in: {', '.join(failed)}")
    return render(reports, config.output_format, title="Verification"), EXIT_VIOLATION if failed else EXIT_OK


def _simulate(config: RunConfig) -> str:
    opts = config.options
    target = opts["target"]
    if target == "otp":
        if not opts.get("message") or not opts.get("key"):
            raise ParameterRangeError("otp needs --message and --key bit strings")
        cipher = otp_encrypt(opts["message"], opts["key"])
        result = SimulationResult(
            target=target,
            inputs={"message": opts["message"], "key": opts["key"]},
            outputs={"ciphertext": cipher, "decrypted": otp_decrypt(cipher, opts["key"])},
        )
    elif target == "toeplitz":
        message = opts.get("message")
        if not message:
            raise ParameterRangeError("toeplitz needs --message")
        rows = opts.get("rows") or max(1, len(message) // 2)
        T = ToeplitzMatrix.random(rows, len(message), config.seed)
        result = SimulationResult(
            target=target,
            inputs={"message": message, "rows": rows, "seed": config.seed},
            outputs={
                "diagonals": "".join(str(b) for b in T.diagonals),
                "full_rank": T.full_rank,
                "hash": toeplitz_hash(message, T),
            },
        )
    elif target == "lfsr":
        spec = LfsrSpec.maximal(opts["seed_bits"])
        stream = lfsr_keystream(spec, opts["state"], opts["length"])
        result = SimulationResult(
            target=target,
            inputs={"seed_bits": spec.seed_bits, "taps": spec.taps, "state": opts["state"], "length": opts["length"]},
            outputs={
                "keystream": format_bits(stream),
                "period": lfsr_period(spec, opts["state"]),
                "whole_key_leak": 2.0 ** -spec.seed_bits,
            },
        )
    else:
        family = MacFamily(block_bits=opts["block_bits"], blocks=opts["blocks"])
        outputs: Dict[str, Any] = {
            "key_bits": family.key_bits,
            "tag_space": family.tag_space,
            "epsilon": float(mac_epsilon(family)),
            "epsilon_bound": float(family.epsilon_bound),
            "impersonation": mac_impersonation_success(family),
        }
        if opts.get("spike") is not None:
            key = spiked_distribution(family.key_bits, opts["spike"], exact=False)
            attack = mac_attack_search(family, key)
            outputs.update({
                "key_delta": attack.key_delta,
                "average_success": attack.average_success,
                "average_cap": attack.average_cap,
                "worst_tag_success": attack.worst_tag_success,
                "worst_tag_cap": attack.worst_tag_cap,
            })
        result = SimulationResult(
            target=target,
            inputs={"block_bits": family.block_bits, "blocks": family.blocks, "spike": opts.get("spike")},
            outputs=outputs,
        )
    return render(result, config.output_format, title=f"{target} simulation")


def _params_sets(config: RunConfig, constants: str) -> List[ProtocolParams]:
    sets = list(config.params_sets.values()) or DEFAULT_PARAMS_SETS
    return [p.model_copy(update={"guarantee_constants": constants}) for p in sets]


def _report(config: RunConfig) -> str:
    opts = config.options
    mode = opts.get("mode") or "table"
    constants = opts.get("constants") or "bound"
    if mode == "statement-f":
        analysis = statement_f_analysis(
            per_bit_level=opts["per_bit_level"],
            block_len=opts["block_len"],
            key_rate=opts["key_rate"],
            guarantee_constants=constants,
        )
        return render(analysis, config.output_format, title="Per-bit failure statement")
    params_sets = _params_sets(config, constants)
    if mode == "table":
        return render(table_report(params_sets), config.output_format)
    model = LeakModel(opts.get("model") or LeakModel.INDIVIDUAL.value)
    if mode == "projection":
        return render([leak_projection(p, model) for p in params_sets], config.output_format, title="Leak projections")
    if mode == "net-rate":
        rates = [net_key_rate(p, systematic=opts.get("systematic", False)) for p in params_sets]
        return render(rates, config.output_format, title="Net key rate")
    results = [
        required_d(opts["target"], opts["horizon"], p, model, blocks_in_horizon=opts.get("blocks"))
        for p in params_sets
    ]
    return render(results, config.output_format, title="Required d")


def _analyze(config: RunConfig) -> str:
    if not config.inputs:
        raise ParameterRangeError("analyze needs a distribution file")
    P = load_distribution(config.inputs[0], exact=config.exact)
    return render(analyze_distribution(P), config.output_format, title=config.inputs[0])


def _emit(text: str, config: RunConfig) -> None:
    if config.output:
        with open(config.output, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"Wrote {config.output}")
    else:
        sys.stdout.write(text)


def run(config: RunConfig) -> int:
    """
    Execute one command.

    Returns:
        0 on success, 1 when a valid bound was violated, 2 on input errors.
    """
    try:
        code = EXIT_OK
        if config.command == "construct":
            text = _construct(config)
        elif config.command == "bound":
            text = _bound(config)
        elif config.command == "verify":
            text, code = _verify(config)
        elif config.command == "simulate":
            text = _simulate(config)
        elif config.command == "report":
            text = _report(config)
        elif config.command == "analyze":
            text = _analyze(config)
        else:
            raise ParameterRangeError(f"unknown command '{config.command}'")
        _emit(text, config)
        return code
    except (KeyLeakError, ValidationError, OSError) as e:
        logger.error(f"{config.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_INPUT_ERROR
    try:
        config = config_from_args(args)
    except KeyLeakError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    logging.basicConfig(level=getattr(logging, config.log_level), stream=sys.stderr)
    return run(config)
