"""
KeyLeak Reports

The comparison table, the per-bit statement analysis, the distribution
dossier, and rendering of any result to JSON, CSV or Markdown.
"""
import csv
import io
import json
import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from jinja2 import Environment, PackageLoader
from pydantic import BaseModel

from . import bounds
from .constructions import mixture_feasibility
from .distributions import (
    KeyDistribution,
    bit_one_probabilities,
    entropy,
    information_leak,
    log2_number,
    min_entropy,
    optimal_ber,
    ordered_profile,
    stat_distance,
)
from .exceptions import ParameterRangeError, VacuousBoundError
from .models import (
    BoundCheck,
    ComparisonTable,
    Dossier,
    LeakModel,
    ProtocolParams,
    StatementFAnalysis,
    TableRow,
)
from .pipeline import AGE_OF_UNIVERSE_SECONDS, DAY_SECONDS, leak_projection

logger = logging.getLogger(__name__)

TOP_PROFILE_SIZE = 10

# Row order of the comparison table
TABLE_CASES: List[Tuple[LeakModel, str]] = [
    (LeakModel.PER_BIT_FALLACY, "per-bit failure reading"),
    (LeakModel.AVERAGE, "correct average"),
    (LeakModel.INDIVIDUAL, "individual"),
    (LeakModel.KPA_INDIVIDUAL, "individual, known plaintext"),
    (LeakModel.UNIFORM_BASELINE, "uniform key"),
    (LeakModel.SYMMETRIC_CIPHER_BASELINE, "symmetric cipher"),
]

# Published figures for the two reference operating points
# (block_len, d_level, key_rate) -> model -> note
REFERENCE_NOTES: Dict[Tuple[int, float, float], Dict[LeakModel, str]] = {
    (100_000, 1e-9, 1e7): {
        LeakModel.AVERAGE: "quoted: one block leak about every 100 days",
        LeakModel.INDIVIDUAL: "quoted: about 300 blocks per day",
        LeakModel.KPA_INDIVIDUAL: "quoted: about one block every 10 seconds",
    },
    (100_000, 4e-9, 1.4e5): {
        LeakModel.INDIVIDUAL: "quoted: about 6 blocks per day",
        LeakModel.KPA_INDIVIDUAL: "quoted: about 100 blocks per day",
    },
}
CIPHER_NOTE = "quoted: about 1e-40 for a 128-bit seed"


def _reference_note(params: ProtocolParams, model: LeakModel) -> Optional[str]:
    if model == LeakModel.SYMMETRIC_CIPHER_BASELINE and params.seed_key_bits == 128:
        return CIPHER_NOTE
    for (block_len, d, rate), notes in REFERENCE_NOTES.items():
        if (
            params.block_len == block_len
            and math.isclose(params.d_level, d, rel_tol=1e-9)
            and math.isclose(params.key_rate, rate, rel_tol=1e-9)
        ):
            return notes.get(model)
    return None


# =============================================================================
# COMPARISON TABLE
# =============================================================================

def table_report(params_list: Sequence[ProtocolParams]) -> ComparisonTable:
    """
    Whole-block compromise figures for every guarantee model and baseline.

    Raises:
        ParameterRangeError: when no params set is given.
    """
    if not params_list:
        raise ParameterRangeError("table report needs at least one params set")
    table = ComparisonTable()
    for params in params_list:
        for model, case in TABLE_CASES:
            projection = leak_projection(params, model)
            note = _reference_note(params, model)
            table.rows.append(
                TableRow(
                    params_name=params.name,
                    case=case,
                    model=model,
                    per_block_probability=projection.per_block_probability,
                    log2_per_block_probability=projection.log2_per_block_probability,
                    expected_block_leaks_per_day=projection.expected_block_leaks_per_day,
                    expected_bit_leaks_per_day=projection.expected_bit_leaks_per_day,
                    mean_time_to_leak_seconds=projection.mean_time_to_leak_seconds,
                    security_bits=projection.security_bits,
                    flagged_incorrect=projection.flagged_incorrect,
                    derived_only=note is None,
                    reference_note=note,
                )
            )
        if params.d_level > 0:
            bits = -math.log2(params.d_level)
            table.observations.append(
                f"{params.name}: d = {params.d_level:g} gives about {bits:.0f} bits of security "
                f"against {params.seed_key_bits} bits for a cipher seed"
            )
    logger.info(f"Comparison table: {len(table.rows)} rows for {len(params_list)} params sets")
    return table


# =============================================================================
# PER-BIT STATEMENT
# =============================================================================

def statement_f_analysis(
    per_bit_level: float = 1e-24,
    block_len: int = 1_000_000,
    key_rate: float = 1e6,
    horizon_seconds: float = AGE_OF_UNIVERSE_SECONDS,
    guarantee_constants: str = "bound",
) -> StatementFAnalysis:
    """
    Puts the per-bit failure reading of a d level next to the corrected
    projections at d = per_bit_level * block_len.
    """
    if not 0.0 <= per_bit_level <= 1.0:
        raise ParameterRangeError(f"per-bit level must lie in [0, 1], got {per_bit_level}")
    d = min(1.0, per_bit_level * block_len)
    params = ProtocolParams(
        name="per-bit statement",
        block_len=block_len,
        d_level=d,
        key_rate=key_rate,
        sifted_len=block_len,
        guarantee_constants=guarantee_constants,
    )
    fallacy = bounds.per_bit_fallacy(d, block_len)
    blocks = key_rate * horizon_seconds / block_len
    projections = [
        leak_projection(params, model)
        for model in (LeakModel.AVERAGE, LeakModel.INDIVIDUAL, LeakModel.KPA_INDIVIDUAL)
    ]
    individual, kpa = projections[1], projections[2]
    analysis = StatementFAnalysis(
        per_bit_level=per_bit_level,
        block_len=block_len,
        key_rate=key_rate,
        horizon_seconds=horizon_seconds,
        d_level=d,
        fallacy_per_block=fallacy.value,
        fallacy_log2_per_block=fallacy.log2_value,
        fallacy_accumulated=blocks * fallacy.value,
        per_bit_accumulated=per_bit_level * key_rate * horizon_seconds,
        projections=projections,
        derived_individual_bits_per_day=individual.expected_bit_leaks_per_day,
        derived_kpa_bits_per_second=kpa.expected_bit_leaks_per_day / DAY_SECONDS,
    )
    logger.info(
        f"Per-bit level {per_bit_level:g}: individual model leaks "
        f"{analysis.derived_individual_bits_per_day:.4g} bits/day"
    )
    return analysis


# =============================================================================
# DOSSIER
# =============================================================================

def _check(name: str, direction: str, bound: Optional[float], true: Optional[float], **extra) -> BoundCheck:
    slack = None
    if bound is not None and true is not None:
        slack = bound - true if direction == "upper" else true - bound
    return BoundCheck(name=name, direction=direction, bound_value=bound, true_value=true, slack=slack, **extra)


def analyze_distribution(P: KeyDistribution) -> Dossier:
    """All metrics of P and every applicable bound with its slack"""
    uniform = KeyDistribution.uniform(P.n, exact=P.exact, dense=P.is_dense)
    profile = ordered_profile(P)
    delta = float(stat_distance(P, uniform))
    leak = information_leak(P)
    ber = float(optimal_ber(P))
    p1 = float(profile.p1)
    l = min_entropy(P)

    checks: List[BoundCheck] = [
        _check("total_compromise", "upper", bounds.total_compromise_bound(P.n, delta).value, p1),
    ]
    best_bit = max(max(float(q), 1.0 - float(q)) for q in bit_one_probabilities(P))
    checks.append(_check("subset_leak (single bit)", "upper", bounds.subset_leak_bound(1, delta).value, best_bit))
    band = bounds.pinsker_band(delta, P.n)
    checks.append(_check("pinsker_lower", "lower", band.details["lower"], leak))
    if band.details["upper"] is not None:
        checks.append(_check("pinsker_upper", "upper", band.details["upper"], leak))
    try:
        checks.append(_check("fano_ber", "lower", bounds.fano_ber_bound(P.n, delta).value, ber))
    except VacuousBoundError as e:
        checks.append(_check("fano_ber", "lower", None, ber, note=str(e)))
    checks.append(
        _check("ber_fallacy", "lower", bounds.ber_fallacy_bound(delta).value, ber, flagged_incorrect=True)
    )
    checks.append(
        _check("per_bit_fallacy", "upper", bounds.per_bit_fallacy(delta, P.n).value, p1, flagged_incorrect=True)
    )
    if l > 0:
        checks.append(
            _check(
                "lhl_min_d",
                "upper",
                bounds.lhl_min_d(profile.p1).value,
                None,
                note="smallest d reachable by hashing this key",
            )
        )

    feasibility = mixture_feasibility(P, stat_distance(P, uniform))
    return Dossier(
        n=P.n,
        dense=P.is_dense,
        p1=p1,
        log2_p1=log2_number(profile.p1),
        stat_distance=delta,
        entropy=entropy(P),
        information_leak=leak,
        min_entropy=l,
        optimal_ber=ber,
        top_profile=[float(v) for v in profile.top(TOP_PROFILE_SIZE)],
        mixture_feasible_at_delta=feasibility.feasible,
        lhl_near_perfect_length=int(bounds.lhl_near_perfect_length(l).value),
        bounds=checks,
    )


# =============================================================================
# RENDERING
# =============================================================================

Payload = Union[BaseModel, Sequence[BaseModel]]


def _records(payload: Payload) -> List[BaseModel]:
    if isinstance(payload, ComparisonTable):
        return list(payload.rows)
    if isinstance(payload, BaseModel):
        return [payload]
    return list(payload)


def _jsonable(payload: Payload) -> Any:
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json")
    return [item.model_dump(mode="json") for item in payload]


def render_json(payload: Payload) -> str:
    return json.dumps(_jsonable(payload), indent=2) + "\n"


def _flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, list):
            flat[name] = json.dumps(value)
        else:
            flat[name] = "" if value is None else value
    return flat


def render_csv(payload: Payload) -> str:
    """One row per record, nested fields flattened to dotted columns"""
    rows = [_flatten(record.model_dump(mode="json")) for record in _records(payload)]
    header: List[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([row.get(key, "") for key in header])
    return output.getvalue()


def _sci(value: Optional[float]) -> str:
    if value is None:
        return "-"
    if value == 0:
        return "0"
    if 1e-3 <= abs(value) < 1e6:
        return f"{value:.4g}"
    return f"{value:.3e}"


def _duration(seconds: Optional[float]) -> str:
    if seconds is None:
        return "never"
    for unit, size in (("years", 365.25 * DAY_SECONDS), ("days", DAY_SECONDS), ("hours", 3600.0)):
        if seconds >= size:
            return f"{_sci(seconds / size)} {unit}"
    return f"{_sci(seconds)} s"


def _environment() -> Environment:
    env = Environment(loader=PackageLoader("keyleak", "templates"), keep_trailing_newline=True)
    env.filters["sci"] = _sci
    env.filters["duration"] = _duration
    return env


def _heading(record: BaseModel) -> str:
    for attr in ("bound_name", "formula", "model", "params_name", "name"):
        value = getattr(record, attr, None)
        if value is not None:
            return str(getattr(value, "value", value))
    if hasattr(record, "n"):
        return f"{record.n}-bit distribution"
    return type(record).__name__


def _fields(record: BaseModel) -> Iterable[Tuple[str, Any]]:
    flat = _flatten(record.model_dump(mode="json"))
    return [(key, _sci(value) if isinstance(value, float) else value) for key, value in flat.items()]


def render_markdown(payload: Payload, title: str = "KeyLeak results") -> str:
    env = _environment()
    if isinstance(payload, ComparisonTable):
        return env.get_template("comparison_table.md.j2").render(table=payload)
    records = [{"heading": _heading(r), "fields": _fields(r)} for r in _records(payload)]
    return env.get_template("records.md.j2").render(title=title, records=records)


def render(payload: Payload, output_format: str = "json", title: str = "KeyLeak results") -> str:
    """Render any result or list of results in the requested format"""
    if output_format == "json":
        return render_json(payload)
    if output_format == "csv":
        return render_csv(payload)
    if output_format == "markdown":
        return render_markdown(payload, title)
    raise ParameterRangeError(f"unknown output format '{output_format}'")
