"""AST node types for the network-composition notation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class InputDecl:
    w: int
    h: int
    c: int

    def to_text(self) -> str:
        return f"I({self.w},{self.h},{self.c})"


@dataclass(frozen=True)
class Conv:
    """Square convolution: kernel side ``k``, stride ``s``, ``q`` filters, padding ``p``."""

    k: int
    s: int
    q: int
    p: int
    # Residual expansion uses "same" padding unless the text spelled it out.
    pad_explicit: bool = field(default=False, compare=False)

    def to_text(self) -> str:
        return f"C({self.k},{self.s},{self.q},{self.p})"


@dataclass(frozen=True)
class Pool:
    s: int
    r: int
    p: int = 0
    mode: str = "max"

    def to_text(self) -> str:
        star = "*" if self.mode == "avg" else ""
        return f"P{star}({self.s},{self.r},{self.p})"


@dataclass(frozen=True)
class LRN:
    def to_text(self) -> str:
        return "L"


@dataclass(frozen=True)
class FC:
    """Fully connected layer; ``units`` is an int or the symbol ``"e"``."""

    units: Union[int, str]

    @property
    def symbolic(self) -> bool:
        return self.units == "e"

    def to_text(self) -> str:
        return f"F({self.units})"


@dataclass(frozen=True)
class Inception:
    c1: int
    cr3: int
    c3: int
    cr5: int
    c5: int
    crM: int

    @property
    def out_channels(self) -> int:
        return self.c1 + self.c3 + self.c5 + self.crM

    def to_text(self) -> str:
        return f"D({self.c1},{self.cr3},{self.c3},{self.cr5},{self.c5},{self.crM})"


@dataclass(frozen=True)
class Residual:
    convs: tuple[Conv, ...]
    repeat: int = 1

    @property
    def stride(self) -> int:
        return max(c.s for c in self.convs)

    def to_text(self) -> str:
        body = "->".join(c.to_text() for c in self.convs)
        prefix = f"{self.repeat}x" if self.repeat != 1 else ""
        return f"{prefix}R({body})"


ElementDecl = Union[Conv, Pool, LRN, FC, Inception, Residual]


@dataclass(frozen=True)
class ArchSpec:
    input: InputDecl
    elements: tuple[ElementDecl, ...]

    def to_text(self) -> str:
        """Canonical text; every optional argument is written out."""
        return "->".join([self.input.to_text()] + [e.to_text() for e in self.elements])

    @property
    def has_residual(self) -> bool:
        return any(isinstance(e, Residual) for e in self.elements)

    def count(self, kind: type) -> int:
        return sum(
            (e.repeat if isinstance(e, Residual) else 1)
            for e in self.elements
            if isinstance(e, kind)
        )
