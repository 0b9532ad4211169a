"""
KeyLeak Distributions

Exact representation of finite key-space distributions and the information
measures computed from them.

Two storage forms:
- dense: an array over all 2^n keys (n <= 24). In exact mode the array holds
  integer numerators over one common denominator (``scale``); in float mode
  it holds float64 probabilities with scale 1.
- sparse: a handful of explicit atoms plus one per-key background value for
  every unlisted key. Used for large n, where constructed distributions only
  differ from uniform on a few keys.

Bit i of a key is the i-th transmitted bit (index 0 = least significant).
"""
import json
import logging
import math
import sys
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from .exceptions import (
    BudgetExceededError,
    ConditioningError,
    DistributionParseError,
    InvalidDistributionError,
    ParameterRangeError,
)
from .models import DistributionDocument

logger = logging.getLogger(__name__)

Number = Union[Fraction, float]

TOLERANCE = 1e-12
DENSE_MAX_BITS = 24
AUTO_DENSE_BITS = 20
FLOAT_SPARSE_MAX_BITS = 1000
H2_TOLERANCE = 1e-9
_INT64_SAFE = 1 << 62


# =============================================================================
# NUMBER HELPERS
# =============================================================================

def to_fraction(value) -> Fraction:
    """Exact rational for a number or an 'a/b' string (floats read as decimals)"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise ParameterRangeError(f"expected a number, got {value!r}")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ParameterRangeError(f"non-finite value {value!r}")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ParameterRangeError(f"expected a number, got {value!r}")


def log2_number(value: Number) -> float:
    """log2 that survives values far below the float range"""
    if value <= 0:
        return -math.inf
    if isinstance(value, Fraction):
        approx = float(value)
        if approx >= sys.float_info.min:
            return math.log2(approx)
        return math.log2(value.numerator) - math.log2(value.denominator)
    return math.log2(float(value))


def _mass(count: int, value: Number) -> Number:
    """count * value without overflowing float for astronomically many keys"""
    if count == 0:
        return Fraction(0) if isinstance(value, Fraction) else 0.0
    if isinstance(value, Fraction):
        return count * value
    return float(count * Fraction(value))


def _rescale(weights: np.ndarray, scale: int, target: int) -> np.ndarray:
    factor = target // scale
    if factor == 1:
        return weights
    if weights.dtype != object and target < _INT64_SAFE:
        return weights * np.int64(factor)
    return weights.astype(object) * factor


def _weights_from_levels(levels: Sequence[Fraction], index: np.ndarray) -> Tuple[np.ndarray, int]:
    scale = reduce(math.lcm, (level.denominator for level in levels), 1)
    ints = [int(level * scale) for level in levels]
    dtype = np.int64 if scale < _INT64_SAFE else object
    table = np.array(ints, dtype=dtype)
    return table[index], scale


def binary_entropy(x: Number) -> float:
    """H2(x) in bits, with H2(0) = H2(1) = 0"""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ParameterRangeError(f"binary_entropy argument must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def inverse_binary_entropy(h: float, tolerance: float = H2_TOLERANCE) -> float:
    """
    Smaller root of H2(x) = h on [0, 0.5], by bisection.

    Returns the lower end of the final bracket, so H2(result) <= h.
    """
    if not 0.0 <= h <= 1.0 + TOLERANCE:
        raise ParameterRangeError(f"binary entropy value must lie in [0, 1], got {h}")
    if h >= 1.0:
        return 0.5
    if h <= 0.0:
        return 0.0
    lo, hi = 0.0, 0.5
    while hi - lo > tolerance:
        mid = (lo + hi) / 2
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return lo


# =============================================================================
# BIT HELPERS
# =============================================================================

def key_to_bits(key: int, n: int) -> str:
    """Binary string with character i = bit i"""
    return "".join("1" if (key >> i) & 1 else "0" for i in range(n))


def bits_to_key(bits: str) -> int:
    if not bits:
        return 0
    return int(bits[::-1], 2)


def extract_bits(keys: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Code whose bit j is bit positions[j] of each key"""
    codes = np.zeros(keys.shape, dtype=np.int64)
    for j, pos in enumerate(positions):
        codes |= ((keys >> pos) & 1) << j
    return codes


def _compress(key: int, positions: Sequence[int]) -> int:
    code = 0
    for j, pos in enumerate(positions):
        code |= ((key >> pos) & 1) << j
    return code


def _check_positions(n: int, positions: Sequence[int]) -> List[int]:
    positions = [int(p) for p in positions]
    if len(set(positions)) != len(positions):
        raise ParameterRangeError(f"bit positions must be distinct: {positions}")
    for pos in positions:
        if not 0 <= pos < n:
            raise ParameterRangeError(f"bit position {pos} outside a {n}-bit key")
    return positions


# =============================================================================
# KEY DISTRIBUTION
# =============================================================================

class KeyDistribution:
    """
    Probability profile over the 2^n keys of an n-bit key space.

    Instances are immutable; every operation returns a new distribution.
    Use the classmethod constructors rather than __init__.
    """

    __slots__ = ("n", "_weights", "_scale", "_atoms", "_background")

    def __init__(
        self,
        n: int,
        weights: Optional[np.ndarray] = None,
        scale: int = 1,
        atoms: Optional[Dict[int, Number]] = None,
        background: Optional[Number] = None,
    ):
        if n < 1:
            raise InvalidDistributionError(f"key length must be at least 1 bit, got {n}")
        self.n = int(n)
        self._weights = None
        self._scale = 1
        self._atoms = None
        self._background = None
        if weights is not None:
            self._init_dense(weights, scale)
        else:
            self._init_sparse(atoms or {}, background)

    def _init_dense(self, weights: np.ndarray, scale: int) -> None:
        if self.n > DENSE_MAX_BITS:
            raise BudgetExceededError(
                f"dense mode supports at most {DENSE_MAX_BITS} bits, got {self.n}"
            )
        weights = np.asarray(weights)
        if weights.shape != (1 << self.n,):
            raise InvalidDistributionError(
                f"expected {1 << self.n} probabilities for n={self.n}, got shape {weights.shape}"
            )
        if weights.dtype.kind == "f":
            if not np.all(np.isfinite(weights)):
                raise InvalidDistributionError("probabilities must be finite")
            if (weights < 0).any():
                raise InvalidDistributionError("probabilities must be non-negative")
            total = float(weights.sum())
            if abs(total - 1.0) > TOLERANCE:
                raise InvalidDistributionError(f"probabilities sum to {total!r}, not 1")
            scale = 1
        elif weights.dtype.kind in "iuO":
            scale = int(scale)
            if scale <= 0:
                raise InvalidDistributionError(f"scale must be positive, got {scale}")
            if (weights < 0).any():
                raise InvalidDistributionError("probabilities must be non-negative")
            total = int(weights.sum())
            if total != scale:
                raise InvalidDistributionError(
                    f"weights sum to {total}, expected the scale {scale}"
                )
            if weights.dtype.kind == "u":
                weights = weights.astype(np.int64)
        else:
            raise InvalidDistributionError(f"unsupported weight dtype {weights.dtype}")
        weights = weights.copy()
        weights.flags.writeable = False
        self._weights = weights
        self._scale = scale

    def _init_sparse(self, atoms: Dict[int, Number], background: Optional[Number]) -> None:
        size = 1 << self.n
        exact = isinstance(background, Fraction) if background is not None else all(
            isinstance(v, Fraction) for v in atoms.values()
        )
        if not exact and self.n > FLOAT_SPARSE_MAX_BITS:
            raise ParameterRangeError(
                f"float mode supports sparse keys up to {FLOAT_SPARSE_MAX_BITS} bits; use exact mode"
            )
        convert = to_fraction if exact else float
        cleaned = {}
        for key, value in atoms.items():
            key = int(key)
            if not 0 <= key < size:
                raise InvalidDistributionError(f"atom key {key} outside a {self.n}-bit key space")
            value = convert(value)
            if value < 0:
                raise InvalidDistributionError(f"negative probability {value} for key {key}")
            cleaned[key] = value
        count = size - len(cleaned)
        background = convert(background if background is not None else 0)
        if background < 0:
            raise InvalidDistributionError(f"negative background probability {background}")
        if count == 0:
            background = convert(0)
        total = sum(cleaned.values(), convert(0)) + _mass(count, background)
        if exact and total != 1:
            raise InvalidDistributionError(f"probabilities sum to {total}, not 1")
        if not exact and abs(total - 1.0) > TOLERANCE:
            raise InvalidDistributionError(f"probabilities sum to {total!r}, not 1")
        self._atoms = cleaned
        self._background = background

    # ----- constructors -----

    @classmethod
    def from_weights(cls, weights, scale: int) -> "KeyDistribution":
        """Dense exact distribution from integer numerators over ``scale``"""
        weights = np.asarray(weights)
        n = int(weights.shape[0]).bit_length() - 1
        return cls(n, weights=weights, scale=scale)

    @classmethod
    def from_probabilities(cls, probs, exact: bool = False) -> "KeyDistribution":
        """Dense distribution from a list of 2^n probabilities"""
        size = len(probs)
        if size < 2 or size & (size - 1):
            raise InvalidDistributionError(f"need 2^n probabilities, got {size}")
        n = size.bit_length() - 1
        if not exact:
            return cls(n, weights=np.asarray([float(p) for p in probs], dtype=np.float64))
        fractions = [to_fraction(p) for p in probs]
        weights, scale = _weights_from_levels(fractions, np.arange(size))
        return cls(n, weights=weights, scale=scale)

    @classmethod
    def from_levels(
        cls, n: int, levels: Sequence[Number], index: np.ndarray, exact: bool = True
    ) -> "KeyDistribution":
        """Dense distribution where key k has probability levels[index[k]]"""
        index = np.asarray(index, dtype=np.int64)
        if exact:
            weights, scale = _weights_from_levels([to_fraction(v) for v in levels], index)
            return cls(n, weights=weights, scale=scale)
        table = np.array([float(v) for v in levels], dtype=np.float64)
        weights = table[index]
        # Renormalize rounding drift from non-dyadic levels
        return cls(n, weights=weights / weights.sum())

    @classmethod
    def from_atoms(
        cls,
        n: int,
        atoms: Mapping[int, Number],
        background: Union[str, Number] = "uniform",
        exact: bool = True,
        dense: Optional[bool] = None,
    ) -> "KeyDistribution":
        """
        Distribution from explicit atoms plus a background for unlisted keys.

        Args:
            n: Key length in bits.
            atoms: Map from key to probability.
            background: "uniform" spreads the remaining mass evenly over the
                unlisted keys, "zero" leaves them at zero, a number sets the
                per-key value directly.
            exact: Keep probabilities as exact rationals.
            dense: Force the storage form; by default dense up to 20 bits.
        """
        convert = to_fraction if exact else float
        values = {int(k): convert(v) for k, v in atoms.items()}
        for key, value in values.items():
            if value < 0:
                raise InvalidDistributionError(f"negative probability {value} for key {key}")
        count = (1 << n) - len(values)
        if background == "uniform":
            residual = convert(1) - sum(values.values(), convert(0))
            if residual < -TOLERANCE:
                raise InvalidDistributionError(f"atoms sum to more than 1 (excess {-residual})")
            if count == 0:
                per_key = convert(0)
            elif exact:
                per_key = residual / count
            else:
                per_key = float(Fraction(max(residual, 0.0)) / count)
        elif background == "zero":
            per_key = convert(0)
        else:
            per_key = convert(background)
        sparse = cls(n, atoms=values, background=per_key)
        if dense is None:
            dense = n <= AUTO_DENSE_BITS
        return sparse.to_dense() if dense else sparse

    @classmethod
    def uniform(cls, n: int, exact: bool = True, dense: Optional[bool] = None) -> "KeyDistribution":
        if dense is None:
            dense = n <= AUTO_DENSE_BITS
        if dense:
            if n > DENSE_MAX_BITS:
                raise BudgetExceededError(f"dense mode supports at most {DENSE_MAX_BITS} bits, got {n}")
            if exact:
                return cls(n, weights=np.ones(1 << n, dtype=np.int64), scale=1 << n)
            return cls(n, weights=np.full(1 << n, 1.0 / (1 << n)))
        background = Fraction(1, 1 << n) if exact else 2.0 ** -n
        return cls(n, atoms={}, background=background)

    @classmethod
    def point_mass(
        cls, n: int, key: int = 0, exact: bool = True, dense: Optional[bool] = None
    ) -> "KeyDistribution":
        one = Fraction(1) if exact else 1.0
        return cls.from_atoms(n, {key: one}, background="zero", exact=exact, dense=dense)

    @classmethod
    def independent_bits(cls, one_probs: Sequence[Number], exact: bool = True) -> "KeyDistribution":
        """Product distribution where bit i is 1 with probability one_probs[i]"""
        n = len(one_probs)
        if exact:
            fracs = [to_fraction(p) for p in one_probs]
            for p in fracs:
                if not 0 <= p <= 1:
                    raise ParameterRangeError(f"bit probability {p} outside [0, 1]")
            scale = 1
            for p in fracs:
                scale *= p.denominator
            weights = np.ones(1, dtype=np.int64 if scale < _INT64_SAFE else object)
            for p in fracs:
                zero = p.denominator - p.numerator
                weights = np.concatenate([weights * zero, weights * p.numerator])
            return cls(n, weights=weights, scale=scale)
        weights = np.ones(1)
        for p in one_probs:
            p = float(p)
            if not 0.0 <= p <= 1.0:
                raise ParameterRangeError(f"bit probability {p} outside [0, 1]")
            weights = np.concatenate([weights * (1.0 - p), weights * p])
        return cls(n, weights=weights / weights.sum())

    # ----- accessors -----

    @property
    def is_dense(self) -> bool:
        return self._weights is not None

    @property
    def exact(self) -> bool:
        if self.is_dense:
            return self._weights.dtype.kind != "f"
        return isinstance(self._background, Fraction)

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def weights(self) -> np.ndarray:
        return self.to_dense()._weights

    @property
    def scale(self) -> int:
        return self.to_dense()._scale

    @property
    def atoms(self) -> Dict[int, Number]:
        if self.is_dense:
            raise InvalidDistributionError("dense distributions have no atom map")
        return dict(self._atoms)

    @property
    def background(self) -> Number:
        if self.is_dense:
            raise InvalidDistributionError("dense distributions have no background value")
        return self._background

    @property
    def probabilities(self) -> np.ndarray:
        """Float64 array of all 2^n probabilities"""
        dense = self.to_dense()
        if dense._weights.dtype.kind == "f":
            return np.asarray(dense._weights, dtype=np.float64)
        return dense._weights.astype(np.float64) / float(dense._scale)

    def _value(self, weight) -> Number:
        if self.exact:
            return Fraction(int(weight), self._scale)
        return float(weight)

    def prob(self, key: int) -> Number:
        key = int(key)
        if not 0 <= key < self.size:
            raise ParameterRangeError(f"key {key} outside a {self.n}-bit key space")
        if self.is_dense:
            return self._value(self._weights[key])
        return self._atoms.get(key, self._background)

    def to_dense(self) -> "KeyDistribution":
        if self.is_dense:
            return self
        if self.n > DENSE_MAX_BITS:
            raise BudgetExceededError(
                f"cannot expand a {self.n}-bit distribution; dense mode stops at {DENSE_MAX_BITS} bits"
            )
        index = np.zeros(self.size, dtype=np.int64)
        levels = [self._background]
        for key, value in self._atoms.items():
            levels.append(value)
            index[key] = len(levels) - 1
        if self.exact:
            weights, scale = _weights_from_levels(levels, index)
            return KeyDistribution(self.n, weights=weights, scale=scale)
        weights = np.array(levels, dtype=np.float64)[index]
        return KeyDistribution(self.n, weights=weights)

    def to_float(self) -> "KeyDistribution":
        if not self.exact:
            return self
        if self.is_dense:
            return KeyDistribution(self.n, weights=self.probabilities)
        return KeyDistribution(
            self.n,
            atoms={k: float(v) for k, v in self._atoms.items()},
            background=float(self._background),
        )

    def __repr__(self) -> str:
        form = "dense" if self.is_dense else f"sparse, {len(self._atoms)} atoms"
        mode = "exact" if self.exact else "float"
        return f"<KeyDistribution(n={self.n}, {form}, {mode})>"


# =============================================================================
# MEASURES
# =============================================================================

@dataclass(frozen=True)
class OrderedProfile:
    """
    Probabilities in non-increasing order, stored as runs of equal values
    so a 2^100000-key background is one run.
    """

    values: Tuple[Number, ...]
    counts: Tuple[int, ...]

    @property
    def p1(self) -> Number:
        return self.values[0]

    @property
    def size(self) -> int:
        return sum(self.counts)

    @property
    def sorted(self) -> List[Number]:
        if self.size > (1 << DENSE_MAX_BITS):
            raise BudgetExceededError(f"profile has {self.size} entries; use runs or top()")
        return self.top(self.size)

    def top(self, k: int) -> List[Number]:
        out: List[Number] = []
        for value, count in zip(self.values, self.counts):
            take = min(count, k - len(out))
            out.extend([value] * take)
            if len(out) >= k:
                break
        return out

    def cumulative(self, m: int) -> Number:
        """Total probability of the m most likely keys"""
        total = self.values[0] * 0
        remaining = m
        for value, count in zip(self.values, self.counts):
            if remaining <= 0:
                break
            take = min(count, remaining)
            total += _mass(take, value)
            remaining -= take
        return total


def stat_distance(P: KeyDistribution, Q: KeyDistribution) -> Number:
    """Statistical (total variation) distance 1/2 sum |P_i - Q_i|"""
    if P.n != Q.n:
        raise InvalidDistributionError(f"dimension mismatch: {P.n}-bit vs {Q.n}-bit distributions")
    if P.is_dense or Q.is_dense:
        P, Q = P.to_dense(), Q.to_dense()
        if P.exact and Q.exact:
            target = math.lcm(P.scale, Q.scale)
            a = _rescale(P.weights, P.scale, target)
            b = _rescale(Q.weights, Q.scale, target)
            return Fraction(int(np.abs(a - b).sum()), 2 * target)
        return 0.5 * float(np.abs(P.probabilities - Q.probabilities).sum())

    exact = P.exact and Q.exact
    convert = (lambda v: v) if exact else float
    keys = set(P._atoms) | set(Q._atoms)
    total = Fraction(0) if exact else 0.0
    for key in keys:
        total += abs(convert(P.prob(key)) - convert(Q.prob(key)))
    total += _mass(P.size - len(keys), abs(convert(P._background) - convert(Q._background)))
    return total / 2


def ordered_profile(P: KeyDistribution) -> OrderedProfile:
    if P.is_dense:
        values, counts = np.unique(P.weights, return_counts=True)
        pairs = [(P._value(v), int(c)) for v, c in zip(values[::-1], counts[::-1])]
    else:
        runs: Counter = Counter()
        for value in P._atoms.values():
            runs[value] += 1
        rest = P.size - len(P._atoms)
        if rest:
            runs[P._background] += rest
        pairs = sorted(runs.items(), key=lambda item: item[0], reverse=True)
    return OrderedProfile(
        values=tuple(v for v, _ in pairs), counts=tuple(c for _, c in pairs)
    )


def _entropy_array(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def entropy(P: KeyDistribution) -> float:
    """Shannon entropy in bits"""
    if P.is_dense:
        return max(0.0, _entropy_array(P.probabilities))
    total = 0.0
    for value in P._atoms.values():
        if value > 0:
            total -= float(value) * log2_number(value)
    rest = P.size - len(P._atoms)
    if rest and P._background > 0:
        total -= float(_mass(rest, P._background)) * log2_number(P._background)
    return max(0.0, total)


def information_leak(P: KeyDistribution) -> float:
    """I_E = n - H(P), computed as sum p (n + log2 p) to avoid cancellation"""
    if P.is_dense:
        p = P.probabilities
        p = p[p > 0]
        return max(0.0, float((p * (P.n + np.log2(p))).sum()))
    shift = 1 << P.n
    total = 0.0
    for value in P._atoms.values():
        if value > 0:
            total += float(value) * log2_number(value * shift)
    rest = P.size - len(P._atoms)
    if rest and P._background > 0:
        total += float(_mass(rest, P._background)) * log2_number(P._background * shift)
    return max(0.0, total)


def min_entropy(P: KeyDistribution) -> float:
    return -log2_number(ordered_profile(P).p1)


# =============================================================================
# JOINT KEY / OBSERVATION
# =============================================================================

@dataclass(frozen=True)
class JointKY:
    """Joint distribution p(k, y) as a (2^n, obs_count) matrix"""

    key_bits: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != (1 << self.key_bits):
            raise InvalidDistributionError(
                f"joint matrix must have {1 << self.key_bits} rows, got shape {probs.shape}"
            )
        if (probs < 0).any():
            raise InvalidDistributionError("joint probabilities must be non-negative")
        total = float(probs.sum())
        if abs(total - 1.0) > TOLERANCE:
            raise InvalidDistributionError(f"joint probabilities sum to {total!r}, not 1")
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @property
    def obs_count(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def from_channel(cls, P: KeyDistribution, channel) -> "JointKY":
        """Joint of key distribution P and a row-stochastic channel p(y|k)"""
        channel = np.asarray(channel, dtype=np.float64)
        if channel.shape[0] != P.size:
            raise InvalidDistributionError(
                f"channel needs {P.size} rows, got {channel.shape[0]}"
            )
        if np.any(np.abs(channel.sum(axis=1) - 1.0) > TOLERANCE):
            raise InvalidDistributionError("channel rows must each sum to 1")
        return cls(P.n, P.probabilities[:, None] * channel)

    @classmethod
    def product(cls, P: KeyDistribution, obs_probs) -> "JointKY":
        obs = np.asarray(obs_probs, dtype=np.float64)
        return cls(P.n, np.outer(P.probabilities, obs))

    def marginal_key(self) -> KeyDistribution:
        weights = self.probs.sum(axis=1)
        return KeyDistribution(self.key_bits, weights=weights / weights.sum())

    def marginal_obs(self) -> np.ndarray:
        return self.probs.sum(axis=0)


def mutual_information(J: JointKY) -> float:
    """I(K;Y) = H(K) + H(Y) - H(K,Y)"""
    h_k = _entropy_array(J.probs.sum(axis=1))
    h_y = _entropy_array(J.marginal_obs())
    h_ky = _entropy_array(J.probs.ravel())
    return max(0.0, h_k + h_y - h_ky)


def conditional_entropy(J: JointKY) -> float:
    """H(K|Y)"""
    return max(0.0, _entropy_array(J.probs.ravel()) - _entropy_array(J.marginal_obs()))


# =============================================================================
# CONDITIONING AND MARGINALS
# =============================================================================

def conditional_profile(P: KeyDistribution, known: Mapping[int, int]) -> KeyDistribution:
    """
    Distribution of the unknown bits given known bit values.

    The result is indexed by the remaining positions in ascending order.

    Raises:
        ConditioningError: if the known bit values have probability zero.
    """
    positions = _check_positions(P.n, list(known.keys()))
    known = {pos: int(known[pos]) for pos in sorted(positions)}
    for pos, bit in known.items():
        if bit not in (0, 1):
            raise ParameterRangeError(f"bit value at position {pos} must be 0 or 1, got {bit}")
    if not known:
        return P
    rest = P.n - len(known)
    if rest < 1:
        raise ParameterRangeError("at least one bit must remain unknown")

    if P.is_dense:
        keys = np.arange(P.size, dtype=np.int64)
        mask = np.ones(P.size, dtype=bool)
        for pos, bit in known.items():
            mask &= ((keys >> pos) & 1) == bit
        # Matching keys ascend, so their order is the order of the free bits
        selected = P.weights[mask]
        if P.exact:
            total = int(selected.sum())
            if total == 0:
                raise ConditioningError(f"conditioning event {known} has probability zero")
            return KeyDistribution(rest, weights=selected, scale=total)
        total = float(selected.sum())
        if total <= 0.0:
            raise ConditioningError(f"conditioning event {known} has probability zero")
        return KeyDistribution(rest, weights=selected / total)

    free = [i for i in range(P.n) if i not in known]
    matching = {}
    for key, value in P._atoms.items():
        if all(((key >> pos) & 1) == bit for pos, bit in known.items()):
            matching[_compress(key, free)] = value
    zero = Fraction(0) if P.exact else 0.0
    total = sum(matching.values(), zero) + _mass((1 << rest) - len(matching), P._background)
    if total == 0:
        raise ConditioningError(f"conditioning event {known} has probability zero")
    atoms = {k: v / total for k, v in matching.items()}
    background = P._background / total
    if not P.exact:
        atoms = {k: float(v) for k, v in atoms.items()}
        background = float(background)
    return KeyDistribution(rest, atoms=atoms, background=background)


def marginal(P: KeyDistribution, positions: Sequence[int]) -> KeyDistribution:
    """Distribution of the bits at ``positions`` (bit j of the result = positions[j])"""
    positions = _check_positions(P.n, positions)
    s = len(positions)
    if s == 0:
        raise ParameterRangeError("marginal needs at least one position")
    if s > DENSE_MAX_BITS:
        raise BudgetExceededError(f"marginal over {s} bits exceeds dense mode")
    if P.is_dense:
        codes = extract_bits(np.arange(P.size, dtype=np.int64), positions)
        if not P.exact:
            return KeyDistribution(s, weights=np.bincount(codes, weights=P.weights, minlength=1 << s))
        out = np.zeros(1 << s, dtype=P.weights.dtype)
        np.add.at(out, codes, P.weights)
        return KeyDistribution(s, weights=out, scale=P.scale)

    per_code = [(1 << (P.n - s)) for _ in range(1 << s)]
    totals: List[Number] = [Fraction(0) if P.exact else 0.0 for _ in range(1 << s)]
    for key, value in P._atoms.items():
        code = _compress(key, positions)
        per_code[code] -= 1
        totals[code] += value
    for code in range(1 << s):
        totals[code] += _mass(per_code[code], P._background)
    return KeyDistribution.from_probabilities(totals, exact=P.exact)


def pushforward(P: KeyDistribution, images: np.ndarray, out_bits: int) -> KeyDistribution:
    """Exact distribution of f(K) where images[k] = f(k)"""
    P = P.to_dense()
    images = np.asarray(images, dtype=np.int64)
    if images.shape != (P.size,):
        raise ParameterRangeError(f"need one image per key ({P.size}), got {images.shape}")
    if images.min() < 0 or images.max() >= (1 << out_bits):
        raise ParameterRangeError(f"images must lie in [0, 2^{out_bits})")
    if not P.exact:
        return KeyDistribution(out_bits, weights=np.bincount(images, weights=P.weights, minlength=1 << out_bits))
    out = np.zeros(1 << out_bits, dtype=P.weights.dtype)
    np.add.at(out, images, P.weights)
    return KeyDistribution(out_bits, weights=out, scale=P.scale)


def bit_one_probabilities(P: KeyDistribution) -> List[Number]:
    """Marginal probability that each bit equals 1"""
    if P.is_dense:
        out = []
        for i in range(P.n):
            ones = P.weights.reshape(-1, 2, 1 << i).sum(axis=(0, 2))[1]
            out.append(P._value(ones) if P.exact else float(ones))
        return out
    out = []
    half = 1 << (P.n - 1)
    for i in range(P.n):
        listed = [v for k, v in P._atoms.items() if (k >> i) & 1]
        zero = Fraction(0) if P.exact else 0.0
        out.append(sum(listed, zero) + _mass(half - len(listed), P._background))
    return out


def optimal_ber(P: KeyDistribution) -> Number:
    """Average error of Eve's best independent guess of each bit"""
    ones = bit_one_probabilities(P)
    one = Fraction(1) if P.exact else 1.0
    errors = [min(p, one - p) for p in ones]
    return sum(errors, one * 0) / P.n


# =============================================================================
# JSON IMPORT / EXPORT
# =============================================================================

def _parse_probability(raw, exact: bool) -> Number:
    try:
        value = to_fraction(raw) if exact or isinstance(raw, str) else float(raw)
    except (ValueError, ZeroDivisionError, ParameterRangeError) as exc:
        raise DistributionParseError(f"unreadable probability {raw!r}") from exc
    return value if exact else float(value)


def parse_distribution(text: str, exact: bool = True, dense: Optional[bool] = None) -> KeyDistribution:
    """
    Parse the JSON distribution format.

    Raises:
        DistributionParseError: on malformed JSON (with line and column) or
            a document that does not match the schema.
        InvalidDistributionError: when the probabilities are invalid.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DistributionParseError(
            f"malformed distribution JSON: {exc.msg}", line=exc.lineno, column=exc.colno
        ) from exc
    try:
        document = DistributionDocument.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first.get("loc", ()))
        raise DistributionParseError(f"invalid distribution document at '{where}': {first['msg']}") from exc

    atoms = {bits_to_key(bits): _parse_probability(p, exact) for bits, p in document.atoms}
    return KeyDistribution.from_atoms(
        document.n, atoms, background=document.background, exact=exact, dense=dense
    )


def load_distribution(path: str, exact: bool = True) -> KeyDistribution:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_distribution(handle.read(), exact=exact)


def _format_probability(value: Number):
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else str(value)
    return float(value)


def distribution_document(P: KeyDistribution) -> DistributionDocument:
    """Compact document: keys off the most common value are listed as atoms"""
    if P.is_dense:
        values, counts = np.unique(P.weights, return_counts=True)
        mode = values[int(np.argmax(counts))]
        keys = np.nonzero(P.weights != mode)[0]
        atoms = [(key_to_bits(int(k), P.n), _format_probability(P.prob(int(k)))) for k in keys]
        background = "zero" if mode == 0 else "uniform"
    else:
        atoms = [
            (key_to_bits(k, P.n), _format_probability(v)) for k, v in sorted(P._atoms.items())
        ]
        rest = P.size - len(P._atoms)
        background = "uniform" if rest and P._background > 0 else "zero"
    return DistributionDocument(n=P.n, atoms=atoms, background=background)


def dump_distribution(P: KeyDistribution) -> str:
    return json.dumps(distribution_document(P).model_dump(mode="json"), indent=2)
