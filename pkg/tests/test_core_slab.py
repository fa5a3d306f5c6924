import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpsgd.core import SharedSlab, make_update_vector
from dpsgd.core.slab import OverwriteTrace, WriteRecord
from dpsgd.errors import ConfigurationError, NumericFaultError


def serial_unroll(initial, grads, eta):
    # independent oracle: the serial recurrence u <- u - eta * g, same
    # arithmetic order as a single uncontended writer
    u = np.array(initial, dtype=float).copy()
    for g in grads:
        u = u - eta * np.asarray(g, dtype=float)
    return u


def test_serial_steps_match_unrolled_recurrence_bitwise():
    rng = np.random.default_rng(7)
    init = rng.normal(size=5)
    grads = [rng.normal(size=5) for _ in range(8)]
    slab = SharedSlab(init)
    for g in grads:
        slab.write_step(g, eta=0.37)
    assert np.array_equal(slab.read(), serial_unroll(init, grads, 0.37))


def test_update_vector_equals_negative_eta_sum_for_dyadic_grads():
    # exactly representable amounts make the sum associative, so the
    # packaged delta equals -eta * sum(grads) with no rounding at all
    init = np.array([1.0, -2.0, 0.5])
    grads = [np.array([1.0, 2.0, -4.0]), np.array([0.5, -1.5, 2.0]),
             np.array([-3.0, 0.25, 8.0])]
    eta = 0.25
    slab = SharedSlab(init)
    for g in grads:
        slab.write_step(g, eta)
    upd = make_update_vector(slab, init, base_version=3, worker_id=1)
    assert np.array_equal(upd.delta, -eta * (grads[0] + grads[1] + grads[2]))
    assert upd.base_version == 3 and upd.worker_id == 1


dyadic = st.integers(min_value=-1024, max_value=1024).map(lambda n: n / 64.0)


@settings(deadline=None, max_examples=50)
@given(
    st.integers(min_value=1, max_value=5),
    st.lists(st.lists(dyadic, min_size=1, max_size=5), min_size=1, max_size=10),
    st.sampled_from([1.0, 0.5, 0.25, 0.125]),
)
def test_serial_reduction_exact_on_dyadics(dim, rows, eta):
    grads = [np.resize(np.array(r), dim) for r in rows]
    init = np.zeros(dim)
    slab = SharedSlab(init)
    for g in grads:
        slab.write_step(g, eta)
    upd = make_update_vector(slab, init, 0, 0)
    total = np.zeros(dim)
    for g in grads:
        total += g
    assert np.array_equal(upd.delta, -eta * total)


def test_write_step_validations():
    slab = SharedSlab(np.zeros(3))
    with pytest.raises(ConfigurationError):
        slab.write_step(np.zeros(3), eta=0.0)
    with pytest.raises(ConfigurationError):
        slab.write_step(np.zeros(2), eta=0.1)
    with pytest.raises(NumericFaultError, match="dimension 2"):
        slab.write_step(np.array([0.0, 0.0, np.nan]), eta=0.1)
    with pytest.raises(ConfigurationError):
        SharedSlab(np.zeros(0))


def test_planted_overwrite_survival_and_replay():
    # synthetic schedule, dim 2: write 1 loaded the initial value on
    # dimension 0 (so write 0's store there is lost) but loaded write 0's
    # store on dimension 1 (both survive there)
    init = np.array([10.0, 20.0])
    tr = OverwriteTrace(init)
    tr.writes.append(WriteRecord(
        amounts=np.array([1.0, 2.0]),
        base_ids=np.array([-1, -1], dtype=np.int64),
        store_ids=np.array([0, 1], dtype=np.int64),
    ))
    tr.writes.append(WriteRecord(
        amounts=np.array([4.0, 8.0]),
        base_ids=np.array([-1, 1], dtype=np.int64),
        store_ids=np.array([2, 3], dtype=np.int64),
    ))
    masks = tr.survival_masks()
    assert masks.tolist() == [[False, True], [True, True]]
    expected = np.array([10.0 - 4.0, 20.0 - 2.0 - 8.0])
    assert np.array_equal(tr.replay(), expected)
    assert np.array_equal(tr.masked_replay(), expected)


def test_trace_epoch_resets_on_load():
    slab = SharedSlab(np.zeros(2), trace=True)
    slab.write_step(np.ones(2), 0.5)
    assert slab.snapshot_trace().n_writes == 1
    slab.load(np.array([5.0, 6.0]))
    tr = slab.snapshot_trace()
    assert tr.n_writes == 0
    assert np.array_equal(tr.initial, np.array([5.0, 6.0]))


def test_quiescent_read_includes_every_write():
    slab = SharedSlab(np.zeros(3), trace=True)
    slab.write_step(np.array([1.0, 0.0, 2.0]), 1.0)
    slab.write_step(np.array([0.0, 3.0, 1.0]), 1.0)
    slab.read()
    tr = slab.snapshot_trace()
    inc = tr.read_inclusion_masks(len(tr.reads) - 1)
    assert inc.all()


def _hammer(slab, grads, eta, barrier):
    barrier.wait()
    for g in grads:
        slab.write_step(g, eta)


def test_contended_trace_replay_is_exact_and_detects_losses():
    rng = np.random.default_rng(42)
    dim, n_threads, steps = 4, 4, 25
    init = rng.normal(size=dim)
    slab = SharedSlab(init, trace=True, jitter_s=1e-3)
    grads = [[rng.normal(size=dim) for _ in range(steps)] for _ in range(n_threads)]
    barrier = threading.Barrier(n_threads)
    threads = [
        threading.Thread(target=_hammer, args=(slab, grads[i], 0.1, barrier))
        for i in range(n_threads)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    tr = slab.snapshot_trace()
    assert tr.n_writes == n_threads * steps
    final = slab.read()
    assert np.array_equal(tr.replay(), final)
    assert np.array_equal(tr.masked_replay(), final)
    # with a ~1 ms window between load and store, concurrent steps overlap
    # almost every time; at least one per-dimension update must be lost
    assert not tr.survival_masks().all()


def test_disjoint_support_threads_compose_serially():
    # two writers that touch disjoint dimensions can never collide
    init = np.zeros(4)
    slab = SharedSlab(init, trace=True, jitter_s=5e-4)
    ga = np.array([1.0, 2.0, 0.0, 0.0])
    gb = np.array([0.0, 0.0, 3.0, 4.0])
    barrier = threading.Barrier(2)
    ta = threading.Thread(target=_hammer, args=(slab, [ga] * 10, 0.5, barrier))
    tb = threading.Thread(target=_hammer, args=(slab, [gb] * 10, 0.5, barrier))
    ta.start(); tb.start(); ta.join(); tb.join()
    expected = -0.5 * 10 * (ga + gb)
    assert np.array_equal(slab.read(), expected)
    # zero-amount dimensions never conflict, so every write survives fully
    assert slab.snapshot_trace().survival_masks().all()


def _reader(slab, out, n, barrier):
    barrier.wait()
    for _ in range(n):
        out.append(slab.read())


def test_reads_never_invent_values():
    rng = np.random.default_rng(3)
    dim = 3
    init = rng.normal(size=dim)
    slab = SharedSlab(init, trace=True, jitter_s=3e-4)
    grads = [[rng.normal(size=dim) for _ in range(20)] for _ in range(2)]
    seen: list[np.ndarray] = []
    barrier = threading.Barrier(3)
    ths = [
        threading.Thread(target=_hammer, args=(slab, grads[i], 0.2, barrier))
        for i in range(2)
    ]
    ths.append(threading.Thread(target=_reader, args=(slab, seen, 40, barrier)))
    for t in ths:
        t.start()
    for t in ths:
        t.join()
    tr = slab.snapshot_trace()
    for k in range(dim):
        legal = set(tr.stored_values(k).tolist()) | {float(tr.initial[k])}
        for snap in seen:
            assert float(snap[k]) in legal
