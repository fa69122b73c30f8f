"""Single-qubit Clifford group, basis-set compilation and RB sequence generation."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gates import (
    DEFAULT_CHANNEL,
    IDENTITY,
    VZ,
    XP,
    ScheduleOp,
    phase_distance,
    r_axis,
    rz,
)

HALF_PI = math.pi / 2

# Each basis gate is a short time-ordered schedule.
XY_GATES: dict[str, tuple[ScheduleOp, ...]] = {
    "X90": (XP(DEFAULT_CHANNEL, HALF_PI, 0.0),),
    "Y90": (XP(DEFAULT_CHANNEL, HALF_PI, HALF_PI),),
    "Xm90": (XP(DEFAULT_CHANNEL, HALF_PI, math.pi),),
    "Ym90": (XP(DEFAULT_CHANNEL, HALF_PI, 3 * HALF_PI),),
}

HZ_GATES: dict[str, tuple[ScheduleOp, ...]] = {
    "H": (
        VZ(DEFAULT_CHANNEL, HALF_PI),
        XP(DEFAULT_CHANNEL, HALF_PI, 0.0),
        VZ(DEFAULT_CHANNEL, HALF_PI),
    ),
    "I": (VZ(DEFAULT_CHANNEL, 0.0),),
    "S": (VZ(DEFAULT_CHANNEL, HALF_PI),),
    "Sdg": (VZ(DEFAULT_CHANNEL, -HALF_PI),),
    "Z": (VZ(DEFAULT_CHANNEL, math.pi),),
}

BASES = {"XY": XY_GATES, "HZ": HZ_GATES}


def _ops_matrix(ops) -> np.ndarray:
    u = IDENTITY.copy()
    for op in ops:
        u = (rz(op.phase) if isinstance(op, VZ) else r_axis(op.theta, op.gamma)) @ u
    return u


def _key(u: np.ndarray) -> tuple:
    # fix the global phase on the largest entry, then round
    flat = u.ravel()
    k = int(np.argmax(np.abs(flat) > 0.5 * np.abs(flat).max() - 1e-9))
    v = flat * (abs(flat[k]) / flat[k])
    v = np.round(v, 8) + 0.0
    return tuple(np.concatenate([v.real, v.imag]).tolist())


def _bfs_words(elements: list[np.ndarray], gates: dict[str, tuple]) -> list[tuple[str, ...]]:
    """Shortest non-empty gate word for every element, by breadth-first search."""
    index = {_key(u): i for i, u in enumerate(elements)}
    names = list(gates)
    mats = {n: _ops_matrix(gates[n]) for n in names}
    words: list[tuple[str, ...] | None] = [None] * len(elements)
    frontier = [((n,), mats[n]) for n in names]
    seen_states = {_key(IDENTITY)}
    while frontier and any(w is None for w in words):
        nxt = []
        for word, u in frontier:
            i = index[_key(u)]
            if words[i] is None:
                words[i] = word
            k = _key(u)
            if k in seen_states:
                continue
            seen_states.add(k)
            for n in names:
                nxt.append((word + (n,), mats[n] @ u))
        # identity is reached only through non-trivial words; allow revisits of it
        frontier = nxt
    if any(w is None for w in words):
        raise RuntimeError("basis does not generate the Clifford group")
    return words  # type: ignore[return-value]


@dataclass(frozen=True)
class CliffordTable:
    """The 24 single-qubit Cliffords with group tables and basis decompositions."""

    matrices: tuple[np.ndarray, ...]
    mult: np.ndarray  # mult[a, b] = index of (a @ b)
    inverse: np.ndarray
    words: dict[str, tuple[tuple[str, ...], ...]]

    def __len__(self) -> int:
        return len(self.matrices)

    def index_of(self, u: np.ndarray) -> int:
        for i, m in enumerate(self.matrices):
            if phase_distance(u, m) < 1e-8:
                return i
        raise KeyError("matrix is not a Clifford")

    def compose(self, sequence) -> int:
        """Index of the product of a time-ordered Clifford index sequence."""
        acc = 0
        for c in sequence:
            acc = int(self.mult[c, acc])
        return acc

    def mean_gate_count(self, basis: str) -> float:
        return float(np.mean([len(w) for w in self.words[basis]]))

    def physical_count(self, basis: str, index: int) -> int:
        gates = BASES[basis]
        return sum(
            1 for g in self.words[basis][index] for op in gates[g] if isinstance(op, XP)
        )

    def schedule(self, index: int, basis: str) -> list[ScheduleOp]:
        gates = BASES[basis]
        return [op for g in self.words[basis][index] for op in gates[g]]


@lru_cache(maxsize=1)
def build_clifford_table() -> CliffordTable:
    """Enumerate the group from X90/Y90 and find minimal words in each basis."""
    gens = [_ops_matrix(XY_GATES["X90"]), _ops_matrix(XY_GATES["Y90"])]
    elements = [IDENTITY.copy()]
    keys = {_key(IDENTITY): 0}
    queue = deque([IDENTITY.copy()])
    while queue:
        u = queue.popleft()
        for g in gens:
            v = g @ u
            k = _key(v)
            if k not in keys:
                keys[k] = len(elements)
                elements.append(v)
                queue.append(v)
    n = len(elements)
    mult = np.empty((n, n), dtype=np.int64)
    for a in range(n):
        for b in range(n):
            mult[a, b] = keys[_key(elements[a] @ elements[b])]
    inverse = np.array([int(np.flatnonzero(mult[a] == 0)[0]) for a in range(n)])
    words = {basis: tuple(_bfs_words(elements, gates)) for basis, gates in BASES.items()}
    return CliffordTable(tuple(elements), mult, inverse, words)


# ---------------------------------------------------------------------------
# sequences


def _rng(seed: int, length: int, seed_index: int) -> np.random.Generator:
    mask = (1 << 64) - 1
    key = [seed & mask, ((length & 0xFFFFFFFF) << 32) | (seed_index & 0xFFFFFFFF)]
    return np.random.Generator(np.random.Philox(key=key))


def rb_sequence(
    m: int, seed: int, table: CliffordTable | None = None, seed_index: int = 0
) -> list[int]:
    """``m`` uniformly random Clifford indices followed by the recovery Clifford.

    Draws come from a Philox stream keyed on ``(seed, m, seed_index)``.
    """
    if m < 1:
        raise ValueError("sequence length must be >= 1")
    table = table or build_clifford_table()
    draws = _rng(seed, m, seed_index).integers(0, len(table), size=m).tolist()
    total = table.compose(draws)
    return draws + [int(table.inverse[total])]


def interleave(sequence: list[int], gate_index: int, table: CliffordTable | None = None) -> list[int]:
    """Insert ``gate_index`` after each random Clifford and recompute the recovery."""
    table = table or build_clifford_table()
    if not 0 <= gate_index < len(table):
        raise ValueError("gate is not in the Clifford table")
    body: list[int] = []
    for c in sequence[:-1]:
        body += [c, gate_index]
    total = table.compose(body)
    return body + [int(table.inverse[total])]


def sequence_unitary(sequence, table: CliffordTable | None = None) -> np.ndarray:
    table = table or build_clifford_table()
    u = IDENTITY.copy()
    for c in sequence:
        u = table.matrices[c] @ u
    return u


def compile_sequence(sequence, table: CliffordTable, basis: str) -> list[ScheduleOp]:
    ops: list[ScheduleOp] = []
    for c in sequence:
        ops += table.schedule(c, basis)
    return ops
