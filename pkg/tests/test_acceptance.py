"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run as `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines on success as well.
"""

import itertools
import time
from contextlib import contextmanager

import pytest

from busycheck.assertions import CREDIT, FALSE, Flat, Obs, Star, _closed_form, _saturate, flat_eq
from busycheck.cli import main
from busycheck.ghost import (
    LOOP_HOLDS_OBLIGATION,
    LOOP_NEEDS_CREDIT,
    RA_LOOP,
    Split,
    StepRequest,
    Stuck,
    annotate,
    check_balance,
    initial_annotated_pool,
    real_step,
    run_annotated,
    serialize_annotated_trace,
)
from busycheck.harness import GenConfig, soundness_campaign
from busycheck.lang import parse
from busycheck.proofs import ForkSplit, Rule, check_proof, verify
from busycheck.semantics import (
    FuelExhausted,
    initial_pool,
    oracle_diverges,
    round_robin,
    run,
    run_schedule,
)


@contextmanager
def criterion(number: int, label: str):
    try:
        yield
    except BaseException:
        print(f"criterion {number} ({label}): FAIL")
        raise
    print(f"criterion {number} ({label}): PASS")


WAITING_PAIR = "fork { exit }; loop skip"
TWO_LEVEL = "fork { fork { loop skip }; exit }; loop skip"

GOLDEN_TRACE = "\n".join(
    [
        "0\t0\tGS-Intro\t{0:(0|0) fork { fork { loop skip }; exit };loop skip;done}",
        "1\t0\tRA-Fork\t{0:(1|1) fork { fork { loop skip }; exit };loop skip;done}",
        "2\t1\tGS-Intro\t{0:(0|1) loop skip;done,1:(1|0) fork { loop skip };exit;done}",
        "3\t1\tRA-Fork\t{0:(0|1) loop skip;done,1:(2|1) fork { loop skip };exit;done}",
        "4\t2\tRA-Loop\t{0:(0|1) loop skip;done,1:(2|0) exit;done,2:(0|1) loop skip;done}",
        "5\t0\tRA-Loop\t{0:(0|1) loop skip;done,1:(2|0) exit;done,2:(0|1) loop skip;done}",
        "6\t0\tRA-Loop\t{0:(0|1) loop skip;done,1:(2|0) exit;done,2:(0|1) loop skip;done}",
        "7\t0\tRA-Loop\t{0:(0|1) loop skip;done,1:(2|0) exit;done,2:(0|1) loop skip;done}",
    ]
)


@pytest.fixture(scope="module")
def campaign():
    started = time.perf_counter()
    report = soundness_campaign(
        GenConfig(max_atoms=12, seed=42, count=500), exhaustive_max_atoms=6
    )
    elapsed = time.perf_counter() - started
    return report, elapsed


@pytest.fixture(scope="module")
def golden_run():
    c = parse(TWO_LEVEL)
    outcome, trace = run_annotated(
        initial_annotated_pool(c),
        [
            StepRequest(0, "intro"),
            StepRequest(0, "real", Split(1, 0)),
            StepRequest(1, "intro"),
            StepRequest(1, "real", Split(0, 1)),
            StepRequest(2, "real"),
            StepRequest(0, "real"),
            StepRequest(0, "real"),
            StepRequest(0, "real"),
        ],
        8,
    )
    return trace


def test_criterion_1_certificate_regression(tmp_path, capsys):
    with criterion(1, "waiting-pair certificate regression"):
        started = time.perf_counter()
        tree = verify(parse(WAITING_PAIR))
        assert tree is not None, "waiting pair must verify"

        # main spine: ViewShift(intro) -> Seq -> [Fork -> [Exit, ViewShift]]
        # and a shift-free Loop with pre obs(0) * credit; the same root node
        # carries the final false-to-obs(0) shift
        assert tree.rule is Rule.VIEW_SHIFT
        assert flat_eq(tree.conclusion.pre, Obs(0))
        assert flat_eq(tree.conclusion.post, Obs(0))
        assert flat_eq(tree.data.inner_pre, Star(Obs(1), CREDIT))  # pair intro
        assert flat_eq(tree.data.inner_post, FALSE)  # final shift source

        seq = tree.premises[0]
        assert seq.rule is Rule.SEQ
        fork, loop = seq.premises
        assert fork.rule is Rule.FORK
        assert fork.data == ForkSplit(1, 0)
        child = fork.premises[0]
        assert child.rule is Rule.VIEW_SHIFT
        assert child.premises[0].rule is Rule.EXIT
        assert flat_eq(child.premises[0].conclusion.pre, Obs(1))
        assert flat_eq(child.data.inner_post, FALSE)
        assert loop.rule is Rule.LOOP  # no ViewShift wrapper around the loop
        assert flat_eq(loop.conclusion.pre, Star(Obs(0), CREDIT))

        assert check_proof(tree) is None

        cert = tmp_path / "cert.json"
        assert main(["verify", "-e", WAITING_PAIR, "--emit-cert", str(cert)]) == 0
        assert main(["check-proof", str(cert)]) == 0
        assert capsys.readouterr().out.splitlines()[-1] == "Ok"

        assert time.perf_counter() - started < 1.0


def test_criterion_2_golden_trace(golden_run):
    with criterion(2, "worked-example golden trace"):
        started = time.perf_counter()
        assert serialize_annotated_trace(golden_run) == GOLDEN_TRACE

        # the proof-guided annotation of the same schedule agrees bitwise
        c = parse(TWO_LEVEL)
        proof = verify(c)
        _, plain = run_schedule(initial_pool(c), [0, 1, 2, 0, 0, 0])
        assert serialize_annotated_trace(annotate(c, proof, plain)) == GOLDEN_TRACE
        assert time.perf_counter() - started < 1.0


def test_criterion_3_sampled_soundness(campaign):
    report, elapsed = campaign
    with criterion(3, "sampled soundness, 500 random + exhaustive <= 6 atoms"):
        assert report.total == 500 + 2320  # plus every program with <= 6 atoms
        assert report.soundness_violations == 0
        assert elapsed < 60.0


def test_criterion_4_leaf_balance(campaign):
    report, elapsed = campaign
    with criterion(4, "leaf balance on random sibling-closed prefixes"):
        assert report.leaf_balance_checks == 3 * report.verified
        assert report.leaf_balance_failures == 0
        assert elapsed < 30.0


def test_criterion_5_ghost_balance(campaign, golden_run):
    report, _ = campaign
    with criterion(5, "ghost balance after every step"):
        assert check_balance(golden_run.initial)
        assert all(check_balance(step.after) for step in golden_run.steps)
        assert report.balance_failures == 0
        assert report.balance_checks > 0


def test_criterion_6_stuckness_triad():
    with criterion(6, "stuckness triad"):
        from busycheck.assertions import bundle
        from busycheck.ghost import AnnotatedPool, AnnotatedThread
        from busycheck.lang import DONE, LOOP_SKIP, SeqCont

        def looping(chunk, credits):
            return AnnotatedPool.of(
                {0: AnnotatedThread(bundle((chunk,), credits), SeqCont(LOOP_SKIP, DONE))}
            )

        assert real_step(looping(0, 0), 0) == Stuck(LOOP_NEEDS_CREDIT)
        assert real_step(looping(1, 1), 0) == Stuck(LOOP_HOLDS_OBLIGATION)
        result = real_step(looping(0, 1), 0)
        assert not isinstance(result, Stuck)
        assert result[1].kind == RA_LOOP


def test_criterion_7_negative_control():
    with criterion(7, "negative control: busy-waiters without exit"):
        for text in ("loop skip", "fork { loop skip }; loop skip"):
            program = parse(text)
            assert verify(program) is None, text
            assert oracle_diverges(program), text
            outcome, _ = run(initial_pool(program), round_robin(), 10_000)
            assert isinstance(outcome, FuelExhausted), text


def test_criterion_8_view_shift_closed_form():
    with criterion(8, "view-shift closed form vs saturation, 1296 tuples"):
        started = time.perf_counter()
        mismatches = []
        for n, k, n2, k2 in itertools.product(range(6), repeat=4):
            left = Flat((n,), k)
            right = Flat((n2,), k2)
            if _closed_form(left, right) != _saturate(left, right):
                mismatches.append((n, k, n2, k2))
        assert mismatches == []
        assert time.perf_counter() - started < 5.0
