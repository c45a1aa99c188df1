import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpsnap import _vclock_py, vclock

try:
    from cpsnap import _vclock as compiled
except ImportError:  # fallback-only install
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernel not built")


def test_hand_computed_clocks():
    # node 0: send(m) ; node 1: local, receive(m)
    node = np.array([0, 1, 1])
    kind = np.array([1, 0, 2])
    ref = np.array([-1, -1, 0])
    out = _vclock_py.assign(node, kind, ref, 2)
    assert out.tolist() == [[1, 0], [0, 1], [1, 2]]


def test_receive_without_an_earlier_send_is_rejected():
    with pytest.raises(ValueError):
        _vclock_py.assign(np.array([0]), np.array([2]), np.array([0]), 1)


def test_first_precedence_finds_the_ordered_pair():
    clocks = np.array([[1, 0, 0], [0, 1, 0], [2, 2, 1]], dtype=np.int32)
    assert _vclock_py.first_precedence(clocks, np.array([0, 1, 2])) == (0, 2)
    concurrent = np.array([[1, 0], [0, 1]], dtype=np.int32)
    assert _vclock_py.first_precedence(concurrent, np.array([0, 1])) is None


@st.composite
def histories(draw):
    n = draw(st.integers(1, 6))
    count = draw(st.integers(0, 60))
    node, kind, ref = [], [], []
    pending: dict = {}
    for e in range(count):
        p = draw(st.integers(0, n - 1))
        node.append(p)
        box = pending.get(p)
        choice = draw(st.integers(0, 2))
        if choice == 2 and box:
            kind.append(2)
            ref.append(box.pop(0))
        elif choice == 1:
            kind.append(1)
            ref.append(-1)
            pending.setdefault(draw(st.integers(0, n - 1)), []).append(e)
        else:
            kind.append(0)
            ref.append(-1)
    arr = lambda xs: np.array(xs, dtype=np.int64)
    return arr(node), arr(kind), arr(ref), n


@given(histories())
@settings(max_examples=150, deadline=None)
def test_clocks_characterise_happened_before(h):
    node, kind, ref, n = h
    out = _vclock_py.assign(node, kind, ref, n)
    # oracle: transitive closure of program order plus send->receive edges
    count = len(node)
    before = [[False] * count for _ in range(count)]
    for b in range(count):
        for a in range(b):
            if node[a] == node[b] or (kind[b] == 2 and ref[b] == a):
                before[a][b] = True
    for k in range(count):
        for a in range(count):
            if before[a][k]:
                for b in range(count):
                    if before[k][b]:
                        before[a][b] = True
    for a in range(count):
        for b in range(count):
            if a != b and node[a] != node[b]:
                by_clock = out[b, node[a]] >= out[a, node[a]]
                assert by_clock == before[a][b]


@needs_compiled
@given(histories())
@settings(max_examples=150, deadline=None)
def test_backends_agree(h):
    node, kind, ref, n = h
    py = _vclock_py.assign(node, kind, ref, n)
    cy = compiled.assign(node, kind, ref, n)
    assert np.array_equal(py, cy)
    if len(node):
        assert _vclock_py.first_precedence(py, node) == compiled.first_precedence(cy, node)


def _backend_with(env_value):
    env = dict(os.environ)
    env.pop("CPSNAP_PURE_PYTHON", None)
    if env_value is not None:
        env["CPSNAP_PURE_PYTHON"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from cpsnap import vclock; print(vclock.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    return out.stdout.strip()


def test_environment_switch_forces_the_fallback():
    assert _backend_with("1") == "python"


@needs_compiled
def test_compiled_kernel_is_selected_by_default():
    assert _backend_with(None) == "cython"
    assert vclock.BACKEND in ("cython", "python")
