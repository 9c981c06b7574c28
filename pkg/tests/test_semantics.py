import pytest

from busycheck.harness import GenConfig, gen_program
from busycheck.lang import (
    DONE,
    EXIT,
    LOOP_SKIP,
    Fork,
    SeqCont,
    parse,
)
from busycheck.semantics import (
    AbruptExit,
    FixedScheduler,
    FuelExhausted,
    ST_FORK,
    ST_LOOP,
    TP_EXIT,
    TP_THREAD_TERM,
    Terminated,
    ThreadPool,
    UnknownThreadError,
    explore,
    initial_pool,
    is_fair_prefix,
    oracle_diverges,
    random_fair,
    rotated_round_robin,
    round_robin,
    run,
    serialize_trace,
    step_pool,
    step_thread,
    sufficient_fuel,
)

LOOP_CONT = SeqCont(LOOP_SKIP, DONE)
EXIT_CONT = SeqCont(EXIT, DONE)


def test_step_thread_loop_self_steps():
    assert step_thread(LOOP_CONT) == (LOOP_CONT, ())


def test_step_thread_fork_spawns_body():
    k = SeqCont(Fork(EXIT), LOOP_CONT)
    assert step_thread(k) == (LOOP_CONT, (EXIT_CONT,))


def test_step_thread_done_has_no_step():
    assert step_thread(DONE) is None
    assert step_thread(EXIT_CONT) is None  # exit is a pool-level step


def test_step_pool_exit_clears_everything():
    pool = ThreadPool.of({0: EXIT_CONT, 3: LOOP_CONT})
    pool2, label = step_pool(pool, 0)
    assert pool2.is_empty()
    assert label.rule == TP_EXIT


def test_step_pool_removes_finished_thread():
    pool = ThreadPool.of({0: DONE})
    pool2, label = step_pool(pool, 0)
    assert pool2.is_empty()
    assert label.rule == TP_THREAD_TERM


def test_step_pool_fork_assigns_fresh_id():
    pool = initial_pool(parse("fork { exit }; loop skip"))
    pool2, label = step_pool(pool, 0)
    assert label.rule == ST_FORK
    assert pool2 == ThreadPool.of({0: LOOP_CONT, 1: EXIT_CONT})


def test_step_pool_fresh_id_is_max_plus_one():
    pool = ThreadPool.of({2: SeqCont(Fork(EXIT), DONE), 7: LOOP_CONT})
    pool2, _ = step_pool(pool, 2)
    assert pool2.tids() == (2, 7, 8)


def test_step_pool_unknown_tid():
    with pytest.raises(UnknownThreadError):
        step_pool(ThreadPool.of({0: DONE}), 1)


def test_run_waiting_pair_exits_abruptly():
    c = parse("fork { exit }; loop skip")
    assert not oracle_diverges(c)  # round-robin is fair, so the run must settle
    outcome, _ = run(initial_pool(c), round_robin(), 1000)
    assert isinstance(outcome, AbruptExit)


def test_run_bare_loop_exhausts_fuel():
    outcome, trace = run(initial_pool(LOOP_SKIP), round_robin(), 50)
    assert isinstance(outcome, FuelExhausted)
    assert len(trace) == 50
    assert all(s.label.rule == ST_LOOP for s in trace)


def test_run_exit_is_one_step():
    outcome, _ = run(initial_pool(EXIT), round_robin(), 10)
    assert outcome == AbruptExit(1)


def test_run_empty_pool_terminates_immediately():
    outcome, trace = run(ThreadPool.of({}), round_robin(), 10)
    assert outcome == Terminated(0)
    assert trace == []


TWO_LOOPERS = ThreadPool.of({0: LOOP_CONT, 1: LOOP_CONT})


def test_fair_prefix_round_robin_window_two():
    _, trace = run(TWO_LOOPERS, round_robin(), 20)
    assert is_fair_prefix(trace, 2)


def test_fair_prefix_detects_starvation():
    _, trace = run(TWO_LOOPERS, FixedScheduler([0] * 10), 10)
    assert not is_fair_prefix(trace, 2)
    assert not is_fair_prefix(trace, 5)


def test_fair_prefix_vacuous_past_the_end():
    _, trace = run(initial_pool(EXIT), round_robin(), 10)
    assert is_fair_prefix(trace, 10)


def test_round_robin_order():
    pool = ThreadPool.of({0: LOOP_CONT, 1: LOOP_CONT, 2: LOOP_CONT})
    _, trace = run(pool, round_robin(), 6)
    assert [s.label.tid for s in trace] == [0, 1, 2, 0, 1, 2]


def test_rotated_round_robin_order():
    _, trace = run(TWO_LOOPERS, rotated_round_robin(1), 4)
    assert [s.label.tid for s in trace] == [1, 0, 1, 0]


def test_random_fair_never_starves():
    pool = ThreadPool.of({0: LOOP_CONT, 1: LOOP_CONT, 2: LOOP_CONT, 3: LOOP_CONT})
    for seed in range(10):
        _, trace = run(pool, random_fair(seed, 8), 120)
        assert is_fair_prefix(trace, 8)


def test_random_fair_is_deterministic_in_seed():
    c = parse("fork { fork { loop skip }; exit }; loop skip")
    runs = [run(initial_pool(c), random_fair(11, 8), 60) for _ in range(2)]
    assert serialize_trace(runs[0][1]) == serialize_trace(runs[1][1])
    assert runs[0][0] == runs[1][0]


def test_oracle_examples():
    assert not oracle_diverges(parse("fork { exit }; loop skip"))
    assert oracle_diverges(parse("loop skip"))
    assert not oracle_diverges(parse("fork { loop skip }; exit"))


def test_oracle_loop_then_dead_exit_diverges():
    assert oracle_diverges(parse("loop skip; exit"))


def _generated(seed, count=120, max_atoms=8):
    return gen_program(GenConfig(max_atoms=max_atoms, seed=seed, count=count))


def test_totality_property():
    # every tid in a reachable pool can step
    for c in _generated(seed=21, count=40):
        pool = initial_pool(c)
        seen = {pool}
        stack = [pool]
        while stack:
            p = stack.pop()
            for tid in p.tids():
                p2, _ = step_pool(p, tid)
                if p2 not in seen:
                    seen.add(p2)
                    stack.append(p2)


def test_pool_growth_property():
    for c in _generated(seed=22, count=60):
        _, trace = run(initial_pool(c), random_fair(5, 12), 80)
        for s in trace:
            delta = len(s.after.threads) - len(s.before.threads)
            if s.label.rule == TP_EXIT:
                assert delta == -len(s.before.threads)
            else:
                assert delta in (-1, 0, 1)


def test_oracle_vs_simulation_property():
    programs = [c for c in _generated(seed=23, count=25, max_atoms=7)]
    for c in programs:
        info = explore(c)
        if info.diverges:
            continue
        fuel = sufficient_fuel(info)
        schedulers = [rotated_round_robin(k) for k in range(info.max_threads)]
        schedulers += [random_fair(seed, 4 * info.max_threads) for seed in range(100)]
        for sched in schedulers:
            outcome, _ = run(initial_pool(c), sched, fuel)
            assert isinstance(outcome, (Terminated, AbruptExit)), (
                f"non-diverging program did not settle: {c}"
            )


def test_trace_serialization_format():
    c = parse("fork { exit }; loop skip")
    _, trace = run(initial_pool(c), round_robin(), 2)
    lines = serialize_trace(trace).splitlines()
    assert lines[0] == "0\t0\tST-Fork\t{0:fork { exit };loop skip;done}"
    assert lines[1] == "1\t1\tTP-Exit\t{0:loop skip;done,1:exit;done}"
