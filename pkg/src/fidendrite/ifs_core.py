"""Planar contracting similarities, multiindices and eventually periodic addresses.

A similarity is stored as ``(ratio, angle, reflect, translation)`` and acts by

    z -> ratio * exp(i*angle) * z + translation          (reflect False)
    z -> ratio * exp(i*angle) * conj(z) + translation    (reflect True)

Multiindices are plain tuples of 1-based letters; ``()`` is the identity word.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]


def normalize_angle(theta: float) -> float:
    """Reduce ``theta`` to the half-open interval (-pi, pi]."""
    t = math.remainder(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Similarity:
    ratio: float
    angle: float = 0.0
    reflect: bool = False
    translation: complex = 0j

    def __post_init__(self):
        if not (self.ratio > 0.0 and math.isfinite(self.ratio)):
            raise ValueError(f"similarity ratio must be positive and finite, got {self.ratio!r}")
        object.__setattr__(self, "translation", complex(self.translation))
        object.__setattr__(self, "reflect", bool(self.reflect))

    @property
    def rotation(self) -> float:
        return normalize_angle(self.angle)

    @cached_property
    def linear(self) -> complex:
        """The complex coefficient ``ratio * exp(i*angle)``."""
        return self.ratio * cmath.exp(1j * self.angle)

    @property
    def is_contracting(self) -> bool:
        return self.ratio < 1.0

    def __call__(self, z):
        if isinstance(z, np.ndarray):
            w = np.conj(z) if self.reflect else z
        else:
            z = complex(z)
            w = z.conjugate() if self.reflect else z
        return self.linear * w + self.translation

    def then(self, other: "Similarity") -> "Similarity":
        """Return ``self o other`` (apply ``other`` first)."""
        if self.reflect:
            angle = self.angle - other.angle
            t = self.linear * other.translation.conjugate() + self.translation
        else:
            angle = self.angle + other.angle
            t = self.linear * other.translation + self.translation
        return Similarity(self.ratio * other.ratio, angle, self.reflect != other.reflect, t)

    __matmul__ = then

    def inverse(self) -> "Similarity":
        inv_r = 1.0 / self.ratio
        if self.reflect:
            # w -> (1/r) e^{i a} conj(w - t)
            t = -inv_r * cmath.exp(1j * self.angle) * self.translation.conjugate()
            return Similarity(inv_r, self.angle, True, t)
        t = -inv_r * cmath.exp(-1j * self.angle) * self.translation
        return Similarity(inv_r, -self.angle, False, t)

    def power(self, n: int) -> "Similarity":
        if n < 0:
            raise ValueError("negative power")
        out = IDENTITY
        for _ in range(n):
            out = out.then(self)
        return out

    def fixed_point(self) -> complex:
        return fixed_point(self)

    def close_to(self, other: "Similarity", tol: float = 1e-9) -> bool:
        """Componentwise comparison on (ratio, rotation, reflect, translation)."""
        if self.reflect != other.reflect:
            return False
        if abs(self.ratio - other.ratio) > tol * max(1.0, self.ratio):
            return False
        if abs(normalize_angle(self.angle - other.angle)) > tol:
            return False
        scale = max(1.0, abs(self.translation), abs(other.translation))
        return abs(self.translation - other.translation) <= tol * scale


IDENTITY = Similarity(1.0)


def fixed_point(s: Similarity) -> complex:
    """Unique fixed point of a contracting similarity."""
    if not s.is_contracting:
        raise ValueError("fixed point requested for a non-contracting map (ratio >= 1)")
    a, t = s.linear, s.translation
    if not s.reflect:
        return t / (1.0 - a)
    # z = a conj(z) + t  as a 2x2 real system in (x, y)
    m = np.array([[1.0 - a.real, -a.imag], [-a.imag, 1.0 + a.real]])
    x, y = np.linalg.solve(m, [t.real, t.imag])
    return complex(x, y)


@dataclass(frozen=True)
class SimSystem:
    """An ordered family of m >= 2 contracting similarities of the plane."""

    maps: tuple[Similarity, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        maps = tuple(self.maps)
        object.__setattr__(self, "maps", maps)
        if len(maps) < 2:
            raise ValueError(f"a system needs at least 2 maps, got {len(maps)}")
        for k, s in enumerate(maps, start=1):
            if not s.is_contracting:
                raise ValueError(f"map {k}: ratio must be < 1 (got {s.ratio!r})")

    @classmethod
    def from_maps(cls, maps: Iterable[Similarity]) -> "SimSystem":
        return cls(tuple(maps))

    @property
    def m(self) -> int:
        return len(self.maps)

    def __len__(self) -> int:
        return len(self.maps)

    def __getitem__(self, k: int) -> Similarity:
        """1-based access, ``system[1]`` is the first map."""
        if not 1 <= k <= len(self.maps):
            raise IndexError(f"map index {k} out of range 1..{len(self.maps)}")
        return self.maps[k - 1]

    @property
    def ratios(self) -> np.ndarray:
        return np.array([s.ratio for s in self.maps])

    @property
    def r_min(self) -> float:
        return min(s.ratio for s in self.maps)

    @property
    def r_max(self) -> float:
        return max(s.ratio for s in self.maps)

    def arrays(self):
        """(linear, translation, reflect, ratio) as numpy arrays, for the kernels."""
        out = self._cache.get("arrays")
        if out is None:
            out = (
                np.array([s.linear for s in self.maps], dtype=np.complex128),
                np.array([s.translation for s in self.maps], dtype=np.complex128),
                np.array([s.reflect for s in self.maps], dtype=np.bool_),
                np.array([s.ratio for s in self.maps], dtype=np.float64),
            )
            self._cache["arrays"] = out
        return out

    def compose(self, word: Sequence[int]) -> Similarity:
        return compose(self, word)

    def ratio_of(self, word: Sequence[int]) -> float:
        r = 1.0
        for k in word:
            r *= self[k].ratio
        return r

    def fixed_points(self) -> list[complex]:
        return [fixed_point(s) for s in self.maps]


def check_word(system: SimSystem, word: Sequence[int]) -> Word:
    w = tuple(int(k) for k in word)
    for k in w:
        if not 1 <= k <= system.m:
            raise IndexError(f"letter {k} out of range 1..{system.m}")
    return w


def compose(system: SimSystem, word: Sequence[int]) -> Similarity:
    """S_{j1} o S_{j2} o ... o S_{jn}; the empty word gives the identity (ratio 1)."""
    out = IDENTITY
    for k in check_word(system, word):
        out = out.then(system.maps[k - 1])
    return out


def parse_word(text: str | Sequence[int]) -> Word:
    """Parse ``"12"`` (single-digit letters) or ``"1.12.3"`` / ``"1 12 3"``."""
    if not isinstance(text, str):
        return tuple(int(k) for k in text)
    s = text.strip()
    if s in ("", "e", "()"):
        return ()
    for sep in (".", ",", " "):
        if sep in s:
            return tuple(int(p) for p in s.split(sep) if p)
    return tuple(int(ch) for ch in s)


def format_word(word: Sequence[int]) -> str:
    if any(k > 9 for k in word):
        return ".".join(str(k) for k in word)
    return "".join(str(k) for k in word)


class Relation(enum.Enum):
    PREFIX = "prefix"
    EXTENSION = "extension"
    INCOMPARABLE = "incomparable"
    EQUAL = "equal"


def word_relation(u: Sequence[int], v: Sequence[int]) -> Relation:
    """PREFIX when u is a proper prefix of v, EXTENSION when v is one of u."""
    u, v = tuple(u), tuple(v)
    if u == v:
        return Relation.EQUAL
    n = min(len(u), len(v))
    if u[:n] != v[:n]:
        return Relation.INCOMPARABLE
    return Relation.PREFIX if len(u) < len(v) else Relation.EXTENSION


def incomparable(u: Sequence[int], v: Sequence[int]) -> bool:
    return word_relation(u, v) is Relation.INCOMPARABLE


def primitive_root(word: Word) -> Word:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p]
    return word


@dataclass(frozen=True)
class Address:
    """The infinite word ``preperiod . period . period ...`` in canonical form."""

    preperiod: Word
    period: Word

    def __post_init__(self):
        pre = tuple(int(k) for k in self.preperiod)
        per = tuple(int(k) for k in self.period)
        if not per:
            raise ValueError("period must be nonempty")
        per = primitive_root(per)
        # absorb trailing preperiod letters into a rotated period
        while pre and pre[-1] == per[-1]:
            per = (per[-1],) + per[:-1]
            pre = pre[:-1]
        object.__setattr__(self, "preperiod", pre)
        object.__setattr__(self, "period", per)

    @classmethod
    def parse(cls, text: str) -> "Address":
        """``"1(2)"`` means 1 2 2 2 ...; ``"(12)"`` is purely periodic."""
        s = text.strip()
        if "(" not in s or not s.endswith(")"):
            raise ValueError(f"address needs a parenthesised period: {text!r}")
        head, per = s[:-1].split("(", 1)
        return cls(parse_word(head), parse_word(per))

    def __str__(self) -> str:
        return f"{format_word(self.preperiod)}({format_word(self.period)})"

    def prefix(self, n: int) -> Word:
        out = list(self.preperiod[:n])
        while len(out) < n:
            out.extend(self.period)
        return tuple(out[:n])

    def shift(self) -> "Address":
        if self.preperiod:
            return Address(self.preperiod[1:], self.period)
        return Address((), self.period[1:] + self.period[:1])

    def prepend(self, word: Sequence[int]) -> "Address":
        return Address(tuple(word) + self.preperiod, self.period)

    @property
    def is_periodic(self) -> bool:
        return not self.preperiod


def eval_address(system: SimSystem, a: Address) -> complex:
    """The point pi(a) = S_preperiod(fix S_period)."""
    z = fixed_point(compose(system, a.period))
    return compose(system, a.preperiod)(z)
