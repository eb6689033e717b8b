"""Weighted interaction score, engagement effectiveness and ordinal grading.

Given per-type interaction counts ``i_j`` for content published over ``t``
attacker transmissions::

    I = sum_j w_j * i_j
    E = I / t

``E`` is graded on a seven-band ordinal scale (F .. A+). Content graded A+
is viral, and every completed multiple of 10,000 raises the viral
multiplier ("viral x2", "viral x3", ...).
"""

from __future__ import annotations

import enum
import math
import operator
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from types import MappingProxyType

from .errors import CogmetricError

VIEW = "view"
LIKE = "like"
COMMENT = "comment"
SHARE = "share"

# Order matters: scores are summed in this order so results are reproducible
# against the plain sequential reference computation.
CANONICAL_TYPES: tuple[str, ...] = (VIEW, LIKE, COMMENT, SHARE)

DEFAULT_WEIGHTS: Mapping[str, float] = MappingProxyType(
    {VIEW: 0.1, LIKE: 0.3, COMMENT: 0.7, SHARE: 1.0}
)

VIRAL_UNIT = 10_000


class UnknownInteractionType(CogmetricError, KeyError):
    """A counted interaction type has no weight in the active scheme."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"no weight configured for interaction type {self.name!r}"


class ZeroTransmissions(CogmetricError, ValueError):
    pass


class InvalidEffectiveness(CogmetricError, ValueError):
    pass


def _ordered(names) -> list[str]:
    canonical = [n for n in CANONICAL_TYPES if n in names]
    return canonical + sorted(n for n in names if n not in CANONICAL_TYPES)


def _check_type_name(name) -> str:
    if not isinstance(name, str) or not name:
        raise ValueError(f"interaction type must be a non-empty string, got {name!r}")
    return name


class InteractionCounts(Mapping):
    """Immutable, non-negative interaction counts keyed by interaction type.

    Lookup is total: a type that was never counted reads as 0. Zero entries
    are not stored, so ``InteractionCounts({"like": 0}) == InteractionCounts()``.
    """

    __slots__ = ("_data",)

    def __init__(self, counts: Mapping[str, int] | None = None, /, **kwargs: int):
        data: dict[str, int] = {}
        merged = dict(counts or {})
        merged.update(kwargs)
        for name, value in merged.items():
            _check_type_name(name)
            if isinstance(value, bool):
                raise TypeError(f"count for {name!r} must be an integer, got bool")
            try:
                value = operator.index(value)
            except TypeError:
                raise TypeError(
                    f"count for {name!r} must be an integer, got {value!r}"
                ) from None
            if value < 0:
                raise ValueError(f"count for {name!r} must be >= 0, got {value}")
            if value:
                data[name] = value
        self._data = {name: data[name] for name in _ordered(data)}

    def __getitem__(self, name: str) -> int:
        return self._data.get(name, 0)

    def __contains__(self, name: object) -> bool:
        return name in self._data

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, InteractionCounts):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self == InteractionCounts(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._data.items()))

    def __add__(self, other: InteractionCounts) -> InteractionCounts:
        if not isinstance(other, InteractionCounts):
            return NotImplemented
        total = dict(self._data)
        for name, value in other._data.items():
            total[name] = total.get(name, 0) + value
        return InteractionCounts(total)

    def __repr__(self) -> str:
        return f"InteractionCounts({self._data!r})"

    def to_dict(self) -> dict[str, int]:
        return dict(self._data)


class WeightScheme(Mapping):
    """Immutable mapping from interaction type to a finite, non-negative weight.

    All four canonical types must be present. Extra (custom) types may be
    added with :meth:`with_custom`.
    """

    __slots__ = ("_weights",)

    def __init__(self, weights: Mapping[str, float]):
        checked: dict[str, float] = {}
        for name, w in weights.items():
            _check_type_name(name)
            if isinstance(w, bool):
                raise TypeError(f"weight for {name!r} must be a real number")
            w = float(w)
            if not math.isfinite(w) or w < 0:
                raise ValueError(f"weight for {name!r} must be finite and >= 0, got {w}")
            checked[name] = w
        missing = [n for n in CANONICAL_TYPES if n not in checked]
        if missing:
            raise ValueError(f"weight scheme is missing canonical types: {missing}")
        self._weights = {name: checked[name] for name in _ordered(checked)}

    @classmethod
    def default(cls) -> WeightScheme:
        return cls(DEFAULT_WEIGHTS)

    @classmethod
    def from_overrides(cls, overrides: Mapping[str, float]) -> WeightScheme:
        """Default weights, with canonical entries replaced and custom ones added."""
        base = dict(DEFAULT_WEIGHTS)
        custom = {k: v for k, v in overrides.items() if k not in CANONICAL_TYPES}
        base.update({k: v for k, v in overrides.items() if k in CANONICAL_TYPES})
        return cls(base).with_custom(custom) if custom else cls(base)

    def with_custom(self, custom: Mapping[str, float]) -> WeightScheme:
        clash = sorted(set(custom) & set(CANONICAL_TYPES))
        if clash:
            raise ValueError(f"custom interaction types clash with canonical ones: {clash}")
        return WeightScheme({**self._weights, **custom})

    @property
    def custom_types(self) -> frozenset[str]:
        return frozenset(self._weights) - frozenset(CANONICAL_TYPES)

    @property
    def is_canonical(self) -> bool:
        """True only for exactly the default four weights (grade thresholds are
        calibrated against these)."""
        return self._weights == dict(DEFAULT_WEIGHTS)

    def __getitem__(self, name: str) -> float:
        return self._weights[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._weights)

    def __len__(self) -> int:
        return len(self._weights)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, WeightScheme):
            return self._weights == other._weights
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._weights.items()))

    def __repr__(self) -> str:
        return f"WeightScheme({self._weights!r})"

    def to_dict(self) -> dict[str, float]:
        return dict(self._weights)


class Grade(str, enum.Enum):
    A_PLUS = "A+"
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"

    @property
    def rank(self) -> int:
        """0 for F up to 6 for A+."""
        return _RANK[self]

    @property
    def lower_bound(self) -> float:
        return _LOWER[self]

    @property
    def description(self) -> str:
        return _DESCRIPTION[self]

    def __str__(self) -> str:
        return self.value


# Descending; the first band whose lower bound is <= E wins.
GRADE_BANDS: tuple[tuple[Grade, float, str], ...] = (
    (Grade.A_PLUS, 10_000.0, "Viral"),
    (Grade.A, 1_000.0, "Excellent"),
    (Grade.B, 100.0, "Above Average"),
    (Grade.C, 10.0, "Average"),
    (Grade.D, 4.0, "Below Average"),
    (Grade.E, 3.0, "Poor"),
    (Grade.F, 0.0, "Failure"),
)
_RANK = {g: len(GRADE_BANDS) - 1 - i for i, (g, _, _) in enumerate(GRADE_BANDS)}
_LOWER = {g: lo for g, lo, _ in GRADE_BANDS}
_DESCRIPTION = {g: d for g, _, d in GRADE_BANDS}

FLAG_GRADES = (Grade.A, Grade.A_PLUS)


def grade_interval(grade: Grade) -> tuple[float, float]:
    """Half-open ``[lower, upper)`` interval of effectiveness values for *grade*."""
    upper = math.inf
    for g, lo, _ in GRADE_BANDS:
        if g is grade:
            return lo, upper
        upper = lo
    raise ValueError(grade)


def compute_weighted_score(counts: Mapping[str, int], scheme: WeightScheme | None = None) -> float:
    """Total weighted interaction score ``I``."""
    scheme = WeightScheme.default() if scheme is None else scheme
    if not isinstance(counts, InteractionCounts):
        counts = InteractionCounts(counts)
    for name in counts:
        if name not in scheme:
            raise UnknownInteractionType(name)
    total = 0.0
    for name in scheme:
        if name in counts:
            total += counts[name] * scheme[name]
    return total


def compute_effectiveness(weighted_score: float, transmissions: int) -> float:
    """Engagement effectiveness ``E = I / t``."""
    if isinstance(transmissions, bool):
        raise TypeError("transmissions must be an integer")
    transmissions = operator.index(transmissions)
    if transmissions == 0:
        raise ZeroTransmissions("transmissions must be >= 1; E is undefined for t = 0")
    if transmissions < 0:
        raise ValueError(f"transmissions must be >= 1, got {transmissions}")
    if weighted_score < 0 or not math.isfinite(weighted_score):
        raise ValueError(f"weighted score must be finite and >= 0, got {weighted_score}")
    return weighted_score / transmissions


def _check_effectiveness(e: float) -> float:
    try:
        e = float(e)
    except (TypeError, ValueError):
        raise InvalidEffectiveness(f"effectiveness must be a real number, got {e!r}") from None
    if not math.isfinite(e) or e < 0:
        raise InvalidEffectiveness(f"effectiveness must be finite and >= 0, got {e}")
    return e


def assign_grade(effectiveness: float) -> Grade:
    e = _check_effectiveness(effectiveness)
    for grade, lower, _ in GRADE_BANDS:
        if e >= lower:
            return grade
    raise AssertionError("unreachable: F band starts at 0")


def viral_multiplier(effectiveness: float) -> int:
    """Number of completed multiples of 10,000; 0 means not viral."""
    e = _check_effectiveness(effectiveness)
    return int(e // VIRAL_UNIT)


def viral_label(multiplier: int) -> str:
    return f"viral x{multiplier}" if multiplier else ""


@dataclass(frozen=True)
class Assessment:
    weighted_score: float
    transmissions: int
    effectiveness: float
    grade: Grade
    viral_multiplier: int
    flagged: bool
    canonical_scheme: bool = True

    @property
    def description(self) -> str:
        return self.grade.description

    def to_dict(self) -> dict:
        return {
            "weighted_score": self.weighted_score,
            "transmissions": self.transmissions,
            "effectiveness": self.effectiveness,
            "grade": self.grade.value,
            "description": self.description,
            "viral_multiplier": self.viral_multiplier,
            "flagged": self.flagged,
            "canonical_scheme": self.canonical_scheme,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> Assessment:
        return cls(
            weighted_score=float(data["weighted_score"]),
            transmissions=int(data["transmissions"]),
            effectiveness=float(data["effectiveness"]),
            grade=Grade(data["grade"]),
            viral_multiplier=int(data["viral_multiplier"]),
            flagged=bool(data["flagged"]),
            canonical_scheme=bool(data.get("canonical_scheme", True)),
        )


def is_flagged(grade: Grade, flag_grade: Grade = Grade.A) -> bool:
    """Whether *grade* is at or above the review threshold *flag_grade*."""
    return grade.rank >= Grade(flag_grade).rank


def assess(
    counts: Mapping[str, int],
    transmissions: int,
    scheme: WeightScheme | None = None,
    *,
    flag_grade: Grade = Grade.A,
) -> Assessment:
    scheme = WeightScheme.default() if scheme is None else scheme
    score = compute_weighted_score(counts, scheme)
    e = compute_effectiveness(score, transmissions)
    grade = assign_grade(e)
    return Assessment(
        weighted_score=score,
        transmissions=int(transmissions),
        effectiveness=e,
        grade=grade,
        viral_multiplier=viral_multiplier(e),
        flagged=is_flagged(grade, flag_grade),
        canonical_scheme=scheme.is_canonical,
    )
