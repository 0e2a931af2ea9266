"""Recursive-descent parser for the architecture notation.

Example::

    I(227,227,3)->C(11,4,96)->L->P(2,3)->C(5,1,256)->...->F(e)

Whitespace is ignored. ``P*`` is average pooling, ``kxR(...)`` (or ``k×R``)
repeats a residual unit, a fourth ``C`` argument and a third ``P`` argument
give padding.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import FC, LRN, ArchSpec, Conv, ElementDecl, Inception, InputDecl, Pool, Residual


class ArchError(ValueError):
    """Base class for notation errors."""


class ArchSyntaxError(ArchError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ArchSemanticError(ArchError):
    pass


_ARROWS = ("->", "→", "⟶")


@dataclass
class _Tok:
    kind: str  # "int", "name", "punct", "arrow", "times", "end"
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        arrow = next((a for a in _ARROWS if text.startswith(a, i)), None)
        if arrow:
            toks.append(_Tok("arrow", arrow, i))
            i += len(arrow)
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("int", text[i:j], i))
            i = j
        elif ch == "×":
            toks.append(_Tok("times", ch, i))
            i += 1
        elif ch == "x" and toks and toks[-1].kind == "int":
            toks.append(_Tok("times", ch, i))
            i += 1
        elif ch.isalpha() and ch.isascii():
            toks.append(_Tok("name", ch, i))
            i += 1
        elif ch in "(),*-":
            toks.append(_Tok("punct", ch, i))
            i += 1
        else:
            raise ArchSyntaxError(f"unexpected character {ch!r}", i)
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        tok = self.cur
        if tok.kind != kind or (text is not None and tok.text != text):
            want = repr(text) if text is not None else kind
            got = repr(tok.text) if tok.kind != "end" else "end of input"
            raise ArchSyntaxError(f"expected {want}, got {got}", tok.offset)
        return self.advance()

    def int_args(self, lo: int, hi: int, allow_e: bool = False) -> tuple[list, list[int]]:
        self.expect("punct", "(")
        vals, offs = [], []
        while True:
            tok = self.cur
            if allow_e and tok.kind == "name" and tok.text == "e":
                vals.append("e")
            elif tok.kind == "int":
                vals.append(int(tok.text))
            else:
                raise ArchSyntaxError("expected integer argument", tok.offset)
            offs.append(tok.offset)
            self.advance()
            if self.cur.kind == "punct" and self.cur.text == ",":
                self.advance()
                continue
            break
        close = self.expect("punct", ")")
        if not lo <= len(vals) <= hi:
            want = str(lo) if lo == hi else f"{lo} to {hi}"
            raise ArchSyntaxError(f"expected {want} arguments, got {len(vals)}", close.offset)
        return vals, offs

    # -- grammar -------------------------------------------------------

    def spec(self) -> ArchSpec:
        tok = self.cur
        if not (tok.kind == "name" and tok.text == "I"):
            if tok.kind == "end":
                raise ArchSemanticError("empty architecture: missing input declaration I(w,h,c)")
            raise ArchSemanticError(
                f"missing input declaration: description must start with I(w,h,c) (offset {tok.offset})"
            )
        self.advance()
        (w, h, c), offs = self.int_args(3, 3)
        _positive([w, h, c], offs, "input dimension")
        inp = InputDecl(w, h, c)
        elements: list[ElementDecl] = []
        while self.cur.kind == "arrow":
            self.advance()
            elements.append(self.element())
        if self.cur.kind != "end":
            raise ArchSyntaxError(f"expected '->' or end of input, got {self.cur.text!r}", self.cur.offset)
        if not elements:
            raise ArchSemanticError("no layers after the input declaration")
        return ArchSpec(inp, tuple(elements))

    def element(self) -> ElementDecl:
        tok = self.cur
        if tok.kind == "int":
            self.advance()
            repeat = int(tok.text)
            self.expect("times")
            r = self.cur
            if not (r.kind == "name" and r.text == "R"):
                raise ArchSyntaxError("repetition must be followed by R(...)", r.offset)
            if repeat < 1:
                raise ArchSemanticError(f"repetition count must be >= 1 (offset {tok.offset})")
            self.advance()
            return self.residual(repeat, r.offset)
        if tok.kind != "name":
            raise ArchSyntaxError(f"expected a layer, got {tok.text or 'end of input'!r}", tok.offset)
        self.advance()
        name = tok.text
        if name == "I":
            raise ArchSemanticError(f"repeated input declaration (offset {tok.offset})")
        if name == "C":
            return self.conv_args()
        if name == "P":
            mode = "max"
            if self.cur.kind == "punct" and self.cur.text == "*":
                self.advance()
                mode = "avg"
            vals, offs = self.int_args(2, 3)
            _positive(vals[:2], offs[:2], "pool stride/side")
            p = vals[2] if len(vals) == 3 else 0
            return Pool(vals[0], vals[1], p, mode)
        if name == "L":
            return LRN()
        if name == "F":
            (units,), offs = self.int_args(1, 1, allow_e=True)
            if units != "e":
                _positive([units], offs, "neuron count")
            return FC(units)
        if name == "D":
            vals, offs = self.int_args(6, 6)
            _positive(vals, offs, "inception filter count")
            return Inception(*vals)
        if name == "R":
            return self.residual(1, tok.offset)
        raise ArchSyntaxError(f"unknown layer {name!r}", tok.offset)

    def conv_args(self) -> Conv:
        vals, offs = self.int_args(3, 4)
        _positive(vals[:3], offs[:3], "conv kernel/stride/filters")
        k, s, q = vals[:3]
        if len(vals) == 4:
            return Conv(k, s, q, vals[3], pad_explicit=True)
        return Conv(k, s, q, k // 2 if s == 1 else 0)

    def residual(self, repeat: int, offset: int) -> Residual:
        self.expect("punct", "(")
        convs = []
        while True:
            tok = self.expect("name")
            if tok.text != "C":
                raise ArchSyntaxError("residual units may only contain C(...) layers", tok.offset)
            convs.append(self.conv_args())
            if self.cur.kind == "arrow":
                self.advance()
                continue
            break
        self.expect("punct", ")")
        if len(convs) < 2:
            raise ArchSemanticError(f"residual unit needs at least 2 convolutions (offset {offset})")
        return Residual(tuple(convs), repeat)


def _positive(vals, offs, what: str) -> None:
    for v, o in zip(vals, offs):
        if v < 1:
            raise ArchSemanticError(f"nonpositive {what} {v} (offset {o})")


def parse_arch(text: str) -> ArchSpec:
    """Parse a network description into an :class:`ArchSpec`."""
    return _Parser(text).spec()
