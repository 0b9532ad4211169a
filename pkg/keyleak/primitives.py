"""
KeyLeak Primitives

Toy-scale versions of the mechanisms whose security is being measured:
- one-time pad
- Toeplitz-matrix privacy amplification over GF(2)
- Fibonacci LFSR keystream (the symmetric-cipher baseline)
- polynomial-evaluation MAC over GF(2^b), an epsilon-ASU family

Bit strings are numpy uint8 arrays or '0'/'1' strings; index 0 is the first
transmitted bit and the least significant bit of the integer form.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from .distributions import KeyDistribution
from .exceptions import (
    BudgetExceededError,
    DegenerateSeedError,
    ParameterRangeError,
    UndefinedAttackError,
)

logger = logging.getLogger(__name__)

BitsLike = Union[str, Sequence[int], np.ndarray]

TOEPLITZ_ENUMERATION_MAX_DIAGONALS = 24
MAC_KEY_SPACE_MAX = 1 << 16
MAC_TABLE_MAX = 1 << 24


# =============================================================================
# BIT HELPERS
# =============================================================================

def parse_bits(text: str) -> np.ndarray:
    text = text.strip()
    if any(c not in "01" for c in text):
        raise ParameterRangeError(f"not a binary string: {text!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def format_bits(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def int_to_bits(value: int, length: int) -> np.ndarray:
    return np.array([(value >> i) & 1 for i in range(length)], dtype=np.uint8)


def bits_to_int(bits: BitsLike) -> int:
    array, _ = _coerce_bits(bits)
    return sum(int(b) << i for i, b in enumerate(array))


def _coerce_bits(bits: BitsLike) -> Tuple[np.ndarray, bool]:
    if isinstance(bits, str):
        return parse_bits(bits), True
    array = np.asarray(bits, dtype=np.uint8)
    if array.ndim != 1 or (array > 1).any():
        raise ParameterRangeError("bit arrays must be one-dimensional 0/1 vectors")
    return array, False


def _restore(bits: np.ndarray, as_text: bool):
    return format_bits(bits) if as_text else bits


# =============================================================================
# ONE-TIME PAD
# =============================================================================

def otp_encrypt(x: BitsLike, k: BitsLike):
    """y_i = x_i XOR k_i; returns a string when x is a string"""
    xa, as_text = _coerce_bits(x)
    ka, _ = _coerce_bits(k)
    if xa.shape != ka.shape:
        raise ParameterRangeError(f"length mismatch: message {xa.size} bits, key {ka.size} bits")
    return _restore(xa ^ ka, as_text)


def otp_decrypt(y: BitsLike, k: BitsLike):
    return otp_encrypt(y, k)


# =============================================================================
# GF(2) LINEAR ALGEBRA AND TOEPLITZ HASHING
# =============================================================================

def gf2_rank(matrix: np.ndarray) -> int:
    """Rank over GF(2) by Gaussian elimination"""
    work = (np.asarray(matrix, dtype=np.uint8) & 1).copy()
    rows, cols = work.shape
    rank = 0
    for col in range(cols):
        pivot = None
        for row in range(rank, rows):
            if work[row, col]:
                pivot = row
                break
        if pivot is None:
            continue
        if pivot != rank:
            work[[rank, pivot]] = work[[pivot, rank]]
        below = np.nonzero(work[:, col])[0]
        for row in below:
            if row != rank:
                work[row] ^= work[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def linear_map_all_keys(matrix: np.ndarray) -> np.ndarray:
    """
    Image code of every input key under a GF(2) matrix.

    Bit i of the image is output row i; bit j of the key multiplies column j.
    """
    matrix = np.asarray(matrix, dtype=np.int64) & 1
    rows, cols = matrix.shape
    weights = np.int64(1) << np.arange(rows, dtype=np.int64)
    column_codes = (matrix * weights[:, None]).sum(axis=0)
    images = np.zeros(1, dtype=np.int64)
    for j in range(cols):
        images = np.concatenate([images, images ^ column_codes[j]])
    return images


@dataclass(frozen=True)
class ToeplitzMatrix:
    """
    rows x cols binary Toeplitz matrix; entry(i, j) = diagonals[i - j + cols - 1].
    """

    rows: int
    cols: int
    diagonals: Tuple[int, ...]

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ParameterRangeError(f"Toeplitz shape must be positive, got {self.rows}x{self.cols}")
        diagonals = tuple(int(b) for b in self.diagonals)
        if len(diagonals) != self.rows + self.cols - 1:
            raise ParameterRangeError(
                f"{self.rows}x{self.cols} Toeplitz matrix needs {self.rows + self.cols - 1} diagonal bits"
            )
        if any(b not in (0, 1) for b in diagonals):
            raise ParameterRangeError("diagonal entries must be 0 or 1")
        object.__setattr__(self, "diagonals", diagonals)

    @property
    def diagonal_count(self) -> int:
        return self.rows + self.cols - 1

    def entry(self, i: int, j: int) -> int:
        return self.diagonals[i - j + self.cols - 1]

    def to_array(self) -> np.ndarray:
        i = np.arange(self.rows)[:, None]
        j = np.arange(self.cols)[None, :]
        return np.asarray(self.diagonals, dtype=np.uint8)[i - j + self.cols - 1]

    def rank(self) -> int:
        return gf2_rank(self.to_array())

    @property
    def full_rank(self) -> bool:
        return self.rank() == min(self.rows, self.cols)

    def hash(self, bits: BitsLike):
        return toeplitz_hash(bits, self)

    @classmethod
    def from_int(cls, rows: int, cols: int, code: int) -> "ToeplitzMatrix":
        count = rows + cols - 1
        return cls(rows, cols, tuple((code >> t) & 1 for t in range(count)))

    @classmethod
    def random(cls, rows: int, cols: int, rng: Union[np.random.Generator, int, None] = None) -> "ToeplitzMatrix":
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        return cls(rows, cols, tuple(int(b) for b in rng.integers(0, 2, rows + cols - 1)))

    @classmethod
    def identity(cls, n: int) -> "ToeplitzMatrix":
        diagonals = [0] * (2 * n - 1)
        diagonals[n - 1] = 1
        return cls(n, n, tuple(diagonals))

    @classmethod
    def enumerate_family(cls, rows: int, cols: int) -> Iterator["ToeplitzMatrix"]:
        count = rows + cols - 1
        if count > TOEPLITZ_ENUMERATION_MAX_DIAGONALS:
            raise BudgetExceededError(
                f"enumerating 2^{count} Toeplitz matrices exceeds the {TOEPLITZ_ENUMERATION_MAX_DIAGONALS}-bit limit"
            )
        for code in range(1 << count):
            yield cls.from_int(rows, cols, code)


def toeplitz_hash(bits: BitsLike, T: ToeplitzMatrix):
    """Matrix-vector product over GF(2)"""
    vector, as_text = _coerce_bits(bits)
    if vector.size != T.cols:
        raise ParameterRangeError(f"input has {vector.size} bits, matrix expects {T.cols}")
    product = (T.to_array().astype(np.int64) @ vector.astype(np.int64)) % 2
    return _restore(product.astype(np.uint8), as_text)


# =============================================================================
# LFSR
# =============================================================================

# Known primitive feedback polynomials, bit e = coefficient of x^e
PRIMITIVE_POLYNOMIALS: Dict[int, int] = {
    3: 0b1101,  # x^3 + x^2 + 1
    4: 0b11001,  # x^4 + x^3 + 1
    5: 0b101001,  # x^5 + x^3 + 1
    7: 0b11000001,  # x^7 + x^6 + 1
    8: 0b100011101,  # x^8 + x^4 + x^3 + x^2 + 1
    16: 0b10110100000000001,  # x^16 + x^14 + x^13 + x^11 + 1
}


@dataclass(frozen=True)
class LfsrSpec:
    """
    Fibonacci LFSR with feedback polynomial c(x) = x^L + sum c_e x^e.

    The output satisfies s[t+L] = sum_{e<L} c_e s[t+e]. State bit e holds
    s[t+e], so the first L outputs are the seed bits.
    """

    seed_bits: int
    taps: int

    def __post_init__(self):
        if self.seed_bits < 1:
            raise ParameterRangeError(f"seed_bits must be positive, got {self.seed_bits}")
        if self.taps >> self.seed_bits != 1:
            raise ParameterRangeError(
                f"feedback polynomial {bin(self.taps)} must have degree exactly {self.seed_bits}"
            )
        if not self.taps & 1:
            raise ParameterRangeError("feedback polynomial needs a constant term (non-degenerate LFSR)")

    @property
    def feedback_mask(self) -> int:
        return self.taps & ((1 << self.seed_bits) - 1)

    @property
    def state_mask(self) -> int:
        return (1 << self.seed_bits) - 1

    @classmethod
    def from_exponents(cls, seed_bits: int, exponents: Sequence[int]) -> "LfsrSpec":
        """From polynomial exponents, e.g. (4, 3, 0) for x^4 + x^3 + 1"""
        taps = 0
        for e in exponents:
            taps |= 1 << int(e)
        return cls(seed_bits, taps)

    @classmethod
    def maximal(cls, seed_bits: int) -> "LfsrSpec":
        if seed_bits not in PRIMITIVE_POLYNOMIALS:
            raise ParameterRangeError(
                f"no stored primitive polynomial of degree {seed_bits}; "
                f"available: {sorted(PRIMITIVE_POLYNOMIALS)}"
            )
        return cls(seed_bits, PRIMITIVE_POLYNOMIALS[seed_bits])


def _check_seed(spec: LfsrSpec, seed: int, allow_zero: bool) -> None:
    if not 0 <= seed <= spec.state_mask:
        raise ParameterRangeError(f"seed {seed} does not fit {spec.seed_bits} bits")
    if seed == 0 and not allow_zero:
        raise DegenerateSeedError("zero seed gives the all-zero stream (period 1)")


def _step_states(spec: LfsrSpec, states: np.ndarray) -> np.ndarray:
    tapped = states & spec.feedback_mask
    feedback = np.zeros_like(states)
    for e in range(spec.seed_bits):
        if (spec.feedback_mask >> e) & 1:
            feedback ^= (tapped >> e) & 1
    return (states >> 1) | (feedback << (spec.seed_bits - 1))


def _run(spec: LfsrSpec, states: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros((states.size, length), dtype=np.uint8)
    for t in range(length):
        out[:, t] = states & 1
        states = _step_states(spec, states)
    return out


def lfsr_advance(spec: LfsrSpec, state: int) -> Tuple[int, int]:
    """One clock: (output bit, next state)"""
    next_state = int(_step_states(spec, np.array([state], dtype=np.int64))[0])
    return state & 1, next_state


def lfsr_state_after(spec: LfsrSpec, seed: int, steps: int) -> int:
    states = np.array([seed], dtype=np.int64)
    for _ in range(steps):
        states = _step_states(spec, states)
    return int(states[0])


def lfsr_keystream(spec: LfsrSpec, seed: int, length: int, allow_zero: bool = False) -> np.ndarray:
    _check_seed(spec, seed, allow_zero)
    if length < 0:
        raise ParameterRangeError(f"length must be non-negative, got {length}")
    return _run(spec, np.array([seed], dtype=np.int64), length)[0]


def lfsr_keystreams(spec: LfsrSpec, seeds: np.ndarray, length: int) -> np.ndarray:
    """Streams for many seeds at once, one row per seed"""
    return _run(spec, np.asarray(seeds, dtype=np.int64), length)


def lfsr_period(spec: LfsrSpec, seed: int) -> int:
    _check_seed(spec, seed, allow_zero=True)
    state = seed
    for steps in range(1, (1 << spec.seed_bits) + 1):
        _, state = lfsr_advance(spec, state)
        if state == seed:
            return steps
    # Non-degenerate feedback is invertible, so every state lies on a cycle
    raise UndefinedAttackError(f"seed {seed} did not return within 2^{spec.seed_bits} steps")


def lfsr_window_counts(spec: LfsrSpec, window: int, offset: int = 0) -> np.ndarray:
    """
    How often each window pattern appears at ``offset`` over all nonzero seeds.

    Entry c is the count of seeds whose window, read with bit i = i-th bit,
    has code c.
    """
    if not 1 <= window <= spec.seed_bits:
        raise ParameterRangeError(f"window must lie in [1, {spec.seed_bits}], got {window}")
    seeds = np.arange(1, 1 << spec.seed_bits, dtype=np.int64)
    streams = lfsr_keystreams(spec, seeds, offset + window)[:, offset:]
    codes = (streams.astype(np.int64) << np.arange(window, dtype=np.int64)).sum(axis=1)
    return np.bincount(codes, minlength=1 << window)


def lfsr_running_key_distribution(
    spec: LfsrSpec, length: int, include_zero_seed: bool = False, exact: bool = True
) -> KeyDistribution:
    """Distribution of the first ``length`` output bits under a uniform seed"""
    start = 0 if include_zero_seed else 1
    seeds = np.arange(start, 1 << spec.seed_bits, dtype=np.int64)
    streams = lfsr_keystreams(spec, seeds, length)
    codes = (streams.astype(np.int64) << np.arange(length, dtype=np.int64)).sum(axis=1)
    counts = np.bincount(codes, minlength=1 << length).astype(np.int64)
    if exact:
        return KeyDistribution(length, weights=counts, scale=int(seeds.size))
    return KeyDistribution(length, weights=counts / seeds.size)


# =============================================================================
# POLYNOMIAL-EVALUATION MAC OVER GF(2^b)
# =============================================================================

IRREDUCIBLE_POLYNOMIALS: Dict[int, int] = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011011,
}


def gf_multiply(a: int, b: int, block_bits: int) -> int:
    modulus = IRREDUCIBLE_POLYNOMIALS[block_bits]
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> block_bits:
            a ^= modulus
    return result


@lru_cache(maxsize=None)
def gf_multiplication_table(block_bits: int) -> np.ndarray:
    if block_bits not in IRREDUCIBLE_POLYNOMIALS:
        raise ParameterRangeError(
            f"block_bits must be one of {sorted(IRREDUCIBLE_POLYNOMIALS)}, got {block_bits}"
        )
    size = 1 << block_bits
    table = np.array(
        [[gf_multiply(a, b, block_bits) for b in range(size)] for a in range(size)],
        dtype=np.int64,
    )
    table.flags.writeable = False
    return table


@dataclass(frozen=True)
class MacFamily:
    """
    h_(x,s)(m) = s + sum_{i=1..c} m_i x^i over GF(2^b).

    Keys pack as x | s << b, messages as c blocks of b bits (block 1 lowest).
    Substitution success under a uniform key is at most c / 2^b.
    """

    block_bits: int
    blocks: int = 1

    def __post_init__(self):
        if self.block_bits not in IRREDUCIBLE_POLYNOMIALS:
            raise ParameterRangeError(
                f"block_bits must be one of {sorted(IRREDUCIBLE_POLYNOMIALS)}, got {self.block_bits}"
            )
        if self.blocks < 0:
            raise ParameterRangeError(f"blocks must be non-negative, got {self.blocks}")

    @property
    def key_bits(self) -> int:
        return 2 * self.block_bits

    @property
    def key_space(self) -> int:
        return 1 << self.key_bits

    @property
    def tag_space(self) -> int:
        return 1 << self.block_bits

    @property
    def message_count(self) -> int:
        return 1 << (self.block_bits * self.blocks)

    @property
    def epsilon_bound(self) -> Fraction:
        return Fraction(max(self.blocks, 1), self.tag_space)


def _mac_tags(family: MacFamily, keys: np.ndarray, messages: np.ndarray) -> np.ndarray:
    table = gf_multiplication_table(family.block_bits)
    mask = family.tag_space - 1
    x = (keys & mask)[:, None]
    s = (keys >> family.block_bits)[:, None]
    acc = np.zeros((keys.size, messages.size), dtype=np.int64)
    for i in range(family.blocks, 0, -1):
        block = ((messages >> (family.block_bits * (i - 1))) & mask)[None, :]
        acc = table[acc ^ block, x]
    return acc ^ s


def mac_tag(family: MacFamily, key: int, message: int) -> int:
    if not 0 <= key < family.key_space:
        raise ParameterRangeError(f"key {key} outside the family's {family.key_space} keys")
    if not 0 <= message < family.message_count:
        raise ParameterRangeError(f"message {message} outside the family's {family.message_count} messages")
    return int(_mac_tags(family, np.array([key]), np.array([message]))[0, 0])


def tag_table(family: MacFamily) -> np.ndarray:
    """Tags for every (key, message) pair, shape (key_space, message_count)"""
    if family.key_space > MAC_KEY_SPACE_MAX:
        raise BudgetExceededError(
            f"key space 2^{family.key_bits} exceeds the exhaustive limit of {MAC_KEY_SPACE_MAX}"
        )
    if family.key_space * family.message_count > MAC_TABLE_MAX:
        raise BudgetExceededError(
            f"{family.key_space} keys x {family.message_count} messages exceeds the table budget"
        )
    return _mac_tags(
        family,
        np.arange(family.key_space, dtype=np.int64),
        np.arange(family.message_count, dtype=np.int64),
    )


def substitution_weights(table: np.ndarray, tag_space: int, m1: int, key_weights: np.ndarray) -> np.ndarray:
    """
    W[m2, t1, t2] = P(h(m1) = t1 and h(m2) = t2) in key-weight units.
    """
    keys, messages = table.shape
    t1 = table[:, m1]
    codes = (np.arange(messages)[None, :] * tag_space + t1[:, None]) * tag_space + table
    flat = np.bincount(
        codes.ravel(),
        weights=np.repeat(np.asarray(key_weights, dtype=np.float64), messages),
        minlength=messages * tag_space * tag_space,
    )
    return flat.reshape(messages, tag_space, tag_space)


def mac_epsilon(family: MacFamily) -> Fraction:
    """
    Exact worst substitution success over all (m1, t1, m2) with a uniform key.

    Raises:
        UndefinedAttackError: when the family has a single message.
        BudgetExceededError: when the key space exceeds 2^16.
    """
    if family.message_count < 2:
        raise UndefinedAttackError("substitution needs at least two messages")
    table = tag_table(family)
    ones = np.ones(family.key_space)
    best = Fraction(0)
    for m1 in range(family.message_count):
        # Key counts are small integers, exact in float64
        W = substitution_weights(table, family.tag_space, m1, ones)
        seen = W[m1].sum(axis=1)
        W[m1] = 0
        peak = W.max(axis=(0, 2))
        for t1 in np.nonzero(seen)[0]:
            ratio = Fraction(int(round(peak[t1])), int(round(seen[t1])))
            if ratio > best:
                best = ratio
    logger.debug(f"MAC family b={family.block_bits} c={family.blocks}: epsilon={best}")
    return best


def mac_impersonation_success(family: MacFamily, key_weights: Optional[np.ndarray] = None) -> float:
    """max over (m, t) of P(h(m) = t)"""
    table = tag_table(family)
    if key_weights is None:
        key_weights = np.full(family.key_space, 1.0 / family.key_space)
    best = 0.0
    for m in range(family.message_count):
        counts = np.bincount(table[:, m], weights=key_weights, minlength=family.tag_space)
        best = max(best, float(counts.max()))
    return best
