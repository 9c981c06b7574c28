"""AST, parser, and printer for the busy-waiting toy language.

The language has exactly four constructs: ``exit`` (abruptly terminates the
whole program), ``loop skip`` (busy-wait forever), ``fork { c }`` (spawn a
thread), and right-associative sequencing ``c ; c``.  A running thread is a
continuation: a chain of atomic commands ending in ``done``.

Concrete grammar (whitespace-insensitive, ``#`` comments to end of line)::

    cmd  ::= atom (";" cmd)?
    atom ::= "exit" | "loop" "skip" | "fork" "{" cmd "}"
"""

from __future__ import annotations

from dataclasses import dataclass


class Command:
    """Base class of command AST nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Exit(Command):
    pass


@dataclass(frozen=True)
class LoopSkip(Command):
    pass


@dataclass(frozen=True)
class Fork(Command):
    body: Command


@dataclass(frozen=True)
class Seq(Command):
    first: Command
    second: Command


EXIT = Exit()
LOOP_SKIP = LoopSkip()


def normalize(c: Command) -> Command:
    """Right-associate sequencing: no Seq ever appears as the first child of a Seq.

    Fork bodies are normalized recursively.  Idempotent.
    """
    while isinstance(c, Seq) and isinstance(c.first, Seq):
        inner = c.first
        c = Seq(inner.first, Seq(inner.second, c.second))
    if isinstance(c, Seq):
        return Seq(normalize(c.first), normalize(c.second))
    if isinstance(c, Fork):
        return Fork(normalize(c.body))
    return c


def seq_atoms(c: Command) -> list[Command]:
    """Top-level atoms of a command, in execution order."""
    out: list[Command] = []
    stack = [c]
    while stack:
        node = stack.pop()
        if isinstance(node, Seq):
            stack.append(node.second)
            stack.append(node.first)
        else:
            out.append(node)
    return out


def last_atom(c: Command) -> Command:
    while isinstance(c, Seq):
        c = c.second
    return c


def size(c: Command) -> int:
    """Total number of atomic commands, counting inside fork bodies."""
    if isinstance(c, Seq):
        return size(c.first) + size(c.second)
    if isinstance(c, Fork):
        return 1 + size(c.body)
    return 1


def seq_of(atoms: list[Command]) -> Command:
    """Right-associated sequence of the given atoms (must be non-empty)."""
    if not atoms:
        raise ValueError("a command has at least one atom")
    cmd = atoms[-1]
    for a in reversed(atoms[:-1]):
        cmd = Seq(a, cmd)
    return cmd


# --- continuations ---------------------------------------------------------


class Continuation:
    __slots__ = ()


@dataclass(frozen=True)
class Done(Continuation):
    pass


@dataclass(frozen=True)
class SeqCont(Continuation):
    head: Command  # always atomic: Exit, LoopSkip, or Fork
    tail: Continuation


DONE = Done()


def to_continuation(c: Command, tail: Continuation = DONE) -> Continuation:
    """Turn a command into the continuation ``c;done``.

    Nested Seq is flattened so every SeqCont head is atomic.
    """
    if isinstance(c, Seq):
        return to_continuation(c.first, to_continuation(c.second, tail))
    return SeqCont(c, tail)


def cont_atoms(k: Continuation) -> list[Command]:
    out = []
    while isinstance(k, SeqCont):
        out.append(k.head)
        k = k.tail
    return out


# --- parser ---------------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class _Token:
    kind: str  # 'word', 'punct', 'eof'
    text: str
    line: int
    col: int


_PUNCT = {";", "{", "}"}


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            col += 1
            i += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in _PUNCT:
            tokens.append(_Token("punct", ch, line, col))
            col += 1
            i += 1
        elif ch.isalpha():
            start = i
            startcol = col
            while i < n and text[i].isalpha():
                i += 1
                col += 1
            tokens.append(_Token("word", text[start:i], line, startcol))
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str) -> None:
        tok = self.peek()
        shown = tok.text if tok.kind != "eof" else "end of input"
        raise ParseError(f"expected {expected}, found {shown!r}", tok.line, tok.col)

    def expect(self, text: str) -> None:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            self.fail(f"'{text}'")
        self.next()

    def command(self) -> Command:
        atom = self.atom()
        if self.peek().text == ";":
            self.next()
            return Seq(atom, self.command())
        return atom

    def atom(self) -> Command:
        tok = self.peek()
        if tok.text == "exit":
            self.next()
            return EXIT
        if tok.text == "loop":
            self.next()
            self.expect("skip")
            return LOOP_SKIP
        if tok.text == "fork":
            self.next()
            self.expect("{")
            body = self.command()
            self.expect("}")
            return Fork(body)
        self.fail("'exit', 'loop skip', or 'fork'")
        raise AssertionError("unreachable")


def parse(text: str) -> Command:
    """Parse a program; the result is right-associated by construction."""
    parser = _Parser(_tokenize(text))
    cmd = parser.command()
    if parser.peek().kind != "eof":
        parser.fail("end of input")
    return cmd


# --- printer ---------------------------------------------------------------


def pretty(c: Command) -> str:
    """Concrete syntax for a command; parse(pretty(c)) == normalize(c)."""
    return "; ".join(_pretty_atom(a) for a in seq_atoms(c))


def _pretty_atom(a: Command) -> str:
    if isinstance(a, Exit):
        return "exit"
    if isinstance(a, LoopSkip):
        return "loop skip"
    if isinstance(a, Fork):
        return "fork { %s }" % pretty(a.body)
    raise TypeError(f"not an atom: {a!r}")


def pretty_continuation(k: Continuation) -> str:
    """Render a continuation with `done` printed explicitly, e.g. `exit;done`."""
    parts = [_pretty_atom(a) for a in cont_atoms(k)]
    parts.append("done")
    return ";".join(parts)
