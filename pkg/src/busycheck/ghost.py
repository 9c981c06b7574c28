"""Annotated executions: thread pools carrying ghost resources.

Each thread carries a complete resource bundle (exactly one obligations
chunk plus credits).  Ghost steps spawn or cancel an obligation-credit pair
and touch nothing else.  Real steps mirror the plain semantics but can get
stuck: looping demands an empty chunk and a credit, and a thread may only
terminate without obligations.  `exit` clears the pool regardless.

`annotate` implements the constructive direction of the soundness argument:
given a checked proof of {obs(0)} c {obs(0)} and a plain trace, it inserts
the proof's ghost moves and fork splits to produce an annotated trace whose
non-ghost steps project back onto the plain trace step for step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .assertions import ResourceBundle, Bottom, Flat, normalize as normalize_assertion
from .lang import (
    Command,
    Continuation,
    Done,
    Exit,
    Fork,
    LoopSkip,
    normalize,
    pretty_continuation,
    to_continuation,
)
from .proofs import (
    ForkSplit,
    ProofTree,
    Rule,
    check_proof,
)
from . import semantics
from .semantics import (
    AbruptExit,
    FuelExhausted,
    Terminated,
    TraceStep,
    StepLabel,
    ThreadPool,
    UnknownThreadError,
)

GS_INTRO = "GS-Intro"
GS_CANCEL = "GS-Cancel"
RA_LOOP = "RA-Loop"
RA_FORK = "RA-Fork"
RA_SEQ_LIFT = "RA-Seq-lift"
RA_EXIT = "RA-Exit"
RA_THREAD_TERM = "RA-ThreadTerm"

GHOST_KINDS = frozenset({GS_INTRO, GS_CANCEL})
RULE_NAME_SET = frozenset(
    {GS_INTRO, GS_CANCEL, RA_LOOP, RA_FORK, RA_SEQ_LIFT, RA_EXIT, RA_THREAD_TERM}
)

LOOP_NEEDS_CREDIT = "LoopNeedsCredit"
LOOP_HOLDS_OBLIGATION = "LoopHoldsObligation"
TERM_HOLDS_OBLIGATION = "TermHoldsObligation"


class CancelUnderflow(ValueError):
    pass


class SplitError(ValueError):
    pass


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotatedThread:
    bundle: ResourceBundle  # complete: exactly one chunk
    cont: Continuation


@dataclass(frozen=True)
class AnnotatedPool:
    threads: tuple[tuple[int, AnnotatedThread], ...]

    def __post_init__(self) -> None:
        for _, entry in self.threads:
            if not entry.bundle.complete:
                raise ValueError("annotated threads hold exactly one obligations chunk")

    @staticmethod
    def of(mapping: dict[int, AnnotatedThread]) -> "AnnotatedPool":
        return AnnotatedPool(tuple(sorted(mapping.items())))

    def tids(self) -> tuple[int, ...]:
        return tuple(tid for tid, _ in self.threads)

    def get(self, tid: int) -> AnnotatedThread:
        for t, entry in self.threads:
            if t == tid:
                return entry
        raise UnknownThreadError(tid)

    def is_empty(self) -> bool:
        return not self.threads

    def replace(self, tid: int, entry: AnnotatedThread) -> "AnnotatedPool":
        return AnnotatedPool(
            tuple((t, entry if t == tid else e) for t, e in self.threads)
        )

    def remove(self, tid: int) -> "AnnotatedPool":
        return AnnotatedPool(tuple((t, e) for t, e in self.threads if t != tid))

    def extend(self, entry: AnnotatedThread) -> tuple["AnnotatedPool", int]:
        new_tid = max((t for t, _ in self.threads), default=-1) + 1
        return AnnotatedPool(self.threads + ((new_tid, entry),)), new_tid

    def erase(self) -> ThreadPool:
        """Forget bundles, keeping the plain pool."""
        return ThreadPool(tuple((t, e.cont) for t, e in self.threads))


EMPTY_ANNOTATED_POOL = AnnotatedPool(())


@dataclass(frozen=True)
class AnnotatedStep:
    tid: int
    kind: str


@dataclass(frozen=True)
class Split:
    """Bundle portion handed to a forked thread."""

    child_obs: int
    child_credits: int


@dataclass(frozen=True)
class Stuck:
    reason: str


@dataclass(frozen=True)
class StuckAt:
    step_index: int
    reason: str


@dataclass(frozen=True)
class ATraceStep:
    before: AnnotatedPool
    step: AnnotatedStep
    after: AnnotatedPool


@dataclass(frozen=True)
class AnnotatedTrace:
    initial: AnnotatedPool
    steps: tuple[ATraceStep, ...]

    def final(self) -> AnnotatedPool:
        return self.steps[-1].after if self.steps else self.initial


def initial_annotated_pool(c: Command, tid0: int = 0, obligations: int = 0) -> AnnotatedPool:
    entry = AnnotatedThread(ResourceBundle((obligations,), 0), to_continuation(normalize(c)))
    return AnnotatedPool.of({tid0: entry})


def ghost_step(pool: AnnotatedPool, tid: int, kind: str) -> AnnotatedPool:
    """Spawn (GS-Intro) or cancel (GS-Cancel) an obligation-credit pair of one thread."""
    entry = pool.get(tid)
    value = entry.bundle.chunks[0]
    credits = entry.bundle.credits
    if kind == GS_INTRO:
        new = ResourceBundle((value + 1,), credits + 1)
    elif kind == GS_CANCEL:
        if value < 1 or credits < 1:
            raise CancelUnderflow(f"thread {tid} holds ({value}|{credits}); nothing to cancel")
        new = ResourceBundle((value - 1,), credits - 1)
    else:
        raise ValueError(f"not a ghost step kind: {kind!r}")
    return pool.replace(tid, AnnotatedThread(new, entry.cont))


def real_step(
    pool: AnnotatedPool, tid: int, split: Split | None = None
) -> tuple[AnnotatedPool, AnnotatedStep] | Stuck:
    """Non-ghost step of thread `tid`; Stuck names the violated side condition.

    Looping keeps the bundle untouched (the credit is held, not consumed).
    Fork splits the bundle conservatively per the supplied `split`; omitting
    it passes nothing to the child.
    """
    entry = pool.get(tid)
    value = entry.bundle.chunks[0]
    credits = entry.bundle.credits
    cont = entry.cont
    if isinstance(cont, Done):
        if value > 0:
            return Stuck(TERM_HOLDS_OBLIGATION)
        return pool.remove(tid), AnnotatedStep(tid, RA_THREAD_TERM)
    head = cont.head
    if isinstance(head, LoopSkip):
        if value > 0:
            return Stuck(LOOP_HOLDS_OBLIGATION)
        if credits < 1:
            return Stuck(LOOP_NEEDS_CREDIT)
        return pool, (AnnotatedStep(tid, RA_LOOP))
    if isinstance(head, Exit):
        return EMPTY_ANNOTATED_POOL, AnnotatedStep(tid, RA_EXIT)
    assert isinstance(head, Fork)
    split = split or Split(0, 0)
    if split.child_obs > value or split.child_credits > credits:
        raise SplitError(
            f"cannot split ({split.child_obs}|{split.child_credits}) "
            f"out of ({value}|{credits})"
        )
    keep = ResourceBundle((value - split.child_obs,), credits - split.child_credits)
    child = AnnotatedThread(
        ResourceBundle((split.child_obs,), split.child_credits),
        to_continuation(head.body),
    )
    pool2 = pool.replace(tid, AnnotatedThread(keep, cont.tail))
    pool2, _ = pool2.extend(child)
    return pool2, AnnotatedStep(tid, RA_FORK)


@dataclass(frozen=True)
class StepRequest:
    tid: int
    kind: str  # "intro", "cancel", or "real"
    split: Split | None = None


def run_annotated(
    pool: AnnotatedPool, requests: list[StepRequest], fuel: int
) -> tuple[object, AnnotatedTrace]:
    """Execute the requested steps, at most `fuel` of them."""
    steps: list[ATraceStep] = []
    current = pool
    for idx, req in enumerate(requests[:fuel]):
        if current.is_empty():
            break
        if req.tid not in current.tids():
            raise UnknownThreadError(req.tid)
        if req.kind == "intro":
            nxt = ghost_step(current, req.tid, GS_INTRO)
            step = AnnotatedStep(req.tid, GS_INTRO)
        elif req.kind == "cancel":
            nxt = ghost_step(current, req.tid, GS_CANCEL)
            step = AnnotatedStep(req.tid, GS_CANCEL)
        elif req.kind == "real":
            result = real_step(current, req.tid, req.split)
            if isinstance(result, Stuck):
                return StuckAt(idx, result.reason), AnnotatedTrace(pool, tuple(steps))
            nxt, step = result
        else:
            raise ValueError(f"unknown request kind {req.kind!r}")
        steps.append(ATraceStep(current, step, nxt))
        current = nxt
    trace = AnnotatedTrace(pool, tuple(steps))
    if current.is_empty():
        if steps and steps[-1].step.kind == RA_EXIT:
            return AbruptExit(len(steps)), trace
        return Terminated(len(steps)), trace
    return FuelExhausted(current), trace


def check_balance(pool: AnnotatedPool) -> bool:
    """Obligations and credits in the system stay equal (spawned in pairs)."""
    obligations = sum(e.bundle.chunks[0] for _, e in pool.threads)
    credits = sum(e.bundle.credits for _, e in pool.threads)
    return obligations == credits


# --- trace annotation guided by a proof tree ----------------------------------


@dataclass
class _Slot:
    ops: list[str] = field(default_factory=list)
    split: Split | None = None
    child: "_Plan | None" = None


@dataclass
class _Plan:
    slots: list[_Slot]
    final_ops: list[str]


def _flat_state(a) -> tuple[int, int] | None:
    f = normalize_assertion(a)
    if isinstance(f, Bottom):
        return None
    if not (isinstance(f, Flat) and len(f.obs) == 1):
        raise AnnotationError("assertion does not describe a single-chunk state")
    return f.obs[0], f.credits


def _ops_between(src, dst) -> list[str]:
    a = _flat_state(src)
    b = _flat_state(dst)
    if a is None or b is None:
        return []  # dead code never executes
    delta = b[0] - a[0]
    if delta >= 0:
        return [GS_INTRO] * delta
    return [GS_CANCEL] * (-delta)


def _extract_plan(t: ProofTree) -> _Plan:
    if t.rule is Rule.VIEW_SHIFT:
        inner = _extract_plan(t.premises[0])
        pre_ops = _ops_between(t.conclusion.pre, t.data.inner_pre)
        post_ops = _ops_between(t.data.inner_post, t.conclusion.post)
        inner.slots[0].ops[:0] = pre_ops
        inner.final_ops.extend(post_ops)
        return inner
    if t.rule is Rule.FRAME:
        return _extract_plan(t.premises[0])
    if t.rule is Rule.SEQ:
        head = _extract_plan(t.premises[0])
        rest = _extract_plan(t.premises[1])
        rest.slots[0].ops[:0] = head.final_ops
        return _Plan(head.slots + rest.slots, rest.final_ops)
    if t.rule is Rule.FORK:
        child = _extract_plan(t.premises[0])
        data: ForkSplit = t.data
        slot = _Slot(split=Split(data.child_obs, data.child_credits), child=child)
        return _Plan([slot], [])
    # Exit and Loop leaves
    return _Plan([_Slot()], [])


@dataclass
class _Cursor:
    plan: _Plan
    index: int = 0
    loop_entered: bool = False


def annotate(
    c: Command, proof: ProofTree, plain_trace: list[TraceStep]
) -> AnnotatedTrace:
    """Annotate a plain run of {tid0: c;done} using a checked proof.

    Ghost steps land immediately before the owning thread's next real step;
    fork splits come from the proof's Fork nodes.  The non-ghost steps of the
    result project onto the input trace exactly.
    """
    cmd = normalize(c)
    violation = check_proof(proof)
    if violation is not None:
        raise AnnotationError(f"proof does not check: {violation}")
    if proof.conclusion.cmd != cmd:
        raise AnnotationError("proof concludes a different command")
    if _flat_state(proof.conclusion.pre) != (0, 0) or _flat_state(proof.conclusion.post) != (0, 0):
        raise AnnotationError("annotation needs a proof of {obs(0)} c {obs(0)}")

    if plain_trace:
        start = plain_trace[0].before
    else:
        raise AnnotationError("empty trace: nothing to annotate")
    if len(start.threads) != 1:
        raise AnnotationError("trace must start from a singleton pool")
    tid0 = start.tids()[0]
    if start.get(tid0) != to_continuation(cmd):
        raise AnnotationError("trace does not start with {tid0: c;done}")

    pool = AnnotatedPool.of(
        {tid0: AnnotatedThread(ResourceBundle((0,), 0), to_continuation(cmd))}
    )
    cursors: dict[int, _Cursor] = {tid0: _Cursor(_extract_plan(proof))}
    steps: list[ATraceStep] = []

    def emit_ghost(tid: int, ops: list[str]) -> None:
        nonlocal pool
        for op in ops:
            nxt = ghost_step(pool, tid, op)
            steps.append(ATraceStep(pool, AnnotatedStep(tid, op), nxt))
            pool = nxt

    def emit_real(tid: int, split: Split | None = None) -> AnnotatedStep:
        nonlocal pool
        result = real_step(pool, tid, split)
        if isinstance(result, Stuck):
            raise AnnotationError(f"annotated run got stuck: {result.reason}")
        nxt, step = result
        steps.append(ATraceStep(pool, step, nxt))
        pool = nxt
        return step

    for plain in plain_trace:
        tid = plain.label.tid
        rule = plain.label.rule
        cursor = cursors.get(tid)
        if cursor is None:
            raise AnnotationError(f"trace steps unknown thread {tid}")
        if rule == semantics.TP_THREAD_TERM:
            emit_ghost(tid, cursor.plan.final_ops)
            emit_real(tid)
        elif rule == semantics.ST_LOOP:
            slot = _slot_at(cursor)
            if not cursor.loop_entered:
                emit_ghost(tid, slot.ops)
                cursor.loop_entered = True
            emit_real(tid)
        elif rule == semantics.ST_FORK:
            slot = _slot_at(cursor)
            if slot.split is None or slot.child is None:
                raise AnnotationError("proof has no fork split where the trace forks")
            emit_ghost(tid, slot.ops)
            before_tids = set(pool.tids())
            emit_real(tid, slot.split)
            (child_tid,) = set(pool.tids()) - before_tids
            cursors[child_tid] = _Cursor(slot.child)
            cursor.index += 1
        elif rule == semantics.TP_EXIT:
            slot = _slot_at(cursor)
            emit_ghost(tid, slot.ops)
            emit_real(tid)
        else:
            raise AnnotationError(f"unknown plain rule {rule!r}")
        if pool.erase() != plain.after:
            raise AnnotationError("annotated run diverged from the plain trace")

    return AnnotatedTrace(
        AnnotatedPool.of({tid0: AnnotatedThread(ResourceBundle((0,), 0), to_continuation(cmd))}),
        tuple(steps),
    )


def _slot_at(cursor: _Cursor) -> _Slot:
    if cursor.index >= len(cursor.plan.slots):
        raise AnnotationError("trace runs past the thread's proof")
    return cursor.plan.slots[cursor.index]


def project(trace: AnnotatedTrace) -> list[TraceStep]:
    """Erase bundles and ghost steps, recovering the plain trace."""
    plain_rule = {
        RA_LOOP: semantics.ST_LOOP,
        RA_FORK: semantics.ST_FORK,
        RA_EXIT: semantics.TP_EXIT,
        RA_THREAD_TERM: semantics.TP_THREAD_TERM,
    }
    out = []
    for step in trace.steps:
        if step.step.kind in GHOST_KINDS:
            continue
        out.append(
            TraceStep(
                step.before.erase(),
                StepLabel(step.step.tid, plain_rule[step.step.kind]),
                step.after.erase(),
            )
        )
    return out


# --- serialization --------------------------------------------------------------


def annotated_pool_str(pool: AnnotatedPool) -> str:
    inner = ",".join(
        f"{tid}:({e.bundle.chunks[0]}|{e.bundle.credits}) {pretty_continuation(e.cont)}"
        for tid, e in pool.threads
    )
    return "{%s}" % inner


def serialize_annotated_trace(trace: AnnotatedTrace) -> str:
    """Plain trace format plus a (obligations|credits) bundle per thread."""
    lines = [
        f"{i}\t{s.step.tid}\t{s.step.kind}\t{annotated_pool_str(s.before)}"
        for i, s in enumerate(trace.steps)
    ]
    return "\n".join(lines)
