"""Compatibility checks for measurement collections, channel collections, and
measurement-channel pairs.

Each check solves a max-margin feasibility program: maximize t such that a
joint object (parent measurement, joint channel, or instrument) with the
required marginals exists with every component >= t * I.  The collection is
compatible exactly when the optimal margin is nonnegative; ``MARGIN_TOL``
absorbs solver round-off.  The margin variable is shifted by a constant
computed from a particular solution of the marginal equalities so the program
stays in nonnegative standard form, and that particular solution doubles as a
strictly feasible starting point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import prod

import numpy as np

from .linalg import ContractError, embed_operator, hermitize
from .qobjects import (
    ChoiMatrix,
    Instrument,
    JointChannel,
    Povm,
    PovmCollection,
    snap_choi_matrix,
    snap_instrument,
    snap_povm,
)
from .sdp import (
    LinearConstraint,
    SdpProblem,
    SolveOptions,
    SolverFailure,
    hermitian_equality,
    solve,
)

MARGIN_TOL = 1e-7
MAX_SETTINGS = 4
MAX_OUTCOMES = 4


def assignments(outcomes: int, settings: int) -> list[tuple[int, ...]]:
    """Deterministic outcome assignments, lexicographic; the parent outcome order."""
    if settings > MAX_SETTINGS or outcomes > MAX_OUTCOMES:
        raise ContractError(
            f"assignment enumeration supports at most {MAX_SETTINGS} settings "
            f"and {MAX_OUTCOMES} outcomes, got {settings} and {outcomes}"
        )
    return list(itertools.product(range(outcomes), repeat=settings))


def lift_setting(n: int, d_out: int, d_in: int, x: int):
    """Embedding of an operator on (output_x (x) input) into the joint space."""
    dims = (d_out,) * n + (d_in,)

    def fn(h):
        return embed_operator(h, dims, (x, n))

    return fn


def lift_input(n: int, d_out: int, d_in: int):
    """Embedding of an operator on the input factor into the joint space."""
    dims = (d_out,) * n + (d_in,)

    def fn(h):
        return embed_operator(h, dims, (n,))

    return fn


@dataclass
class CompatibilityVerdict:
    compatible: bool
    margin: float
    joint: object | None

    def to_json(self) -> dict:
        j = None
        if self.joint is not None:
            j = self.joint.to_json()
        return {"compatible": bool(self.compatible), "margin": float(self.margin), "joint": j}


def _require_optimal(sol, what):
    if sol.status != "optimal":
        raise SolverFailure(f"{what} solve ended with status {sol.status}", sol)


def _padded_elements(collection: PovmCollection):
    """Effects as a [setting][outcome] grid, short settings padded with zeros."""
    o = collection.outcomes
    d = collection.dim
    grid = []
    for p in collection.povms:
        row = [np.asarray(m, dtype=complex) for m in p.elements]
        row += [np.zeros((d, d), dtype=complex)] * (o - len(row))
        grid.append(row)
    return grid


def check_measurements(collection: PovmCollection,
                       options: SolveOptions | None = None) -> CompatibilityVerdict:
    """Decide whether all measurements arise from one parent measurement."""
    collection.validate()
    n, o, d = collection.n, collection.outcomes, collection.dim
    lam = assignments(o, n)
    grid = _padded_elements(collection)

    count = o ** (n - 1)  # assignments fixing one setting's outcome
    ghat = [
        sum(grid[x][l[x]] for x in range(n)) / count - (n - 1) * np.eye(d) / o**n
        for l in lam
    ]
    floor = min(np.linalg.eigvalsh(g)[0] for g in ghat)
    t0 = -min(0.0, floor) + 1.0
    u0 = max(0.5, t0 + floor - 0.5)

    cons = []
    for x in range(n):
        for i in range(o):
            members = [k for k, l in enumerate(lam) if l[x] == i]
            cons += hermitian_equality(
                d,
                [(k, lambda h: h) for k in members],
                rhs=grid[x][i] + count * t0 * np.eye(d),
                scalar_terms=[(0, lambda h: count * np.trace(h).real)],
            )
    prob = SdpProblem(
        blocks=[d] * len(lam),
        objective=[np.zeros((d, d), dtype=complex)] * len(lam),
        constraints=cons,
        scalar_costs=[-1.0],
    )
    start = [g - (u0 - t0) * np.eye(d) for g in ghat]
    sol = solve(prob, options, initial_blocks=start, initial_scalars=[u0])
    _require_optimal(sol, "measurement compatibility")
    margin = sol.scalar_values[0] - t0
    joint = None
    if margin >= -MARGIN_TOL:
        parent = [hermitize(b) + margin * np.eye(d) for b in sol.block_values]
        joint = snap_povm(parent)
    return CompatibilityVerdict(margin >= -MARGIN_TOL, margin, joint)


def _channel_particular(chois, n, d_out, d_in):
    full = d_out**n * d_in
    g = np.zeros((full, full), dtype=complex)
    for x, ch in enumerate(chois):
        g += lift_setting(n, d_out, d_in, x)(ch.matrix) / d_out ** (n - 1)
    g -= (n - 1) * np.eye(full) / (d_in * d_out**n)
    return g


def check_channels(channels, options: SolveOptions | None = None) -> CompatibilityVerdict:
    """Decide whether the channels are marginals of one joint channel."""
    chois = [c.validate() for c in channels]
    n = len(chois)
    if n < 1:
        raise ContractError("need at least one channel")
    d_in, d_out = chois[0].dim_in, chois[0].dim_out
    if any(c.dim_in != d_in or c.dim_out != d_out for c in chois):
        raise ContractError("all channels must share input and output dimensions")
    if n > MAX_SETTINGS:
        raise ContractError(f"at most {MAX_SETTINGS} channels supported, got {n}")
    full = d_out**n * d_in

    ghat = _channel_particular(chois, n, d_out, d_in)
    floor = np.linalg.eigvalsh(ghat)[0]
    t0 = -min(0.0, floor) + 1.0
    u0 = max(0.5, t0 + floor - 0.5)

    cons = []
    for x, ch in enumerate(chois):
        scale = d_out ** (n - 1)
        cons += hermitian_equality(
            d_out * d_in,
            [(0, lift_setting(n, d_out, d_in, x))],
            rhs=ch.matrix + scale * t0 * np.eye(d_out * d_in),
            scalar_terms=[(0, lambda h, s=scale: s * np.trace(h).real)],
        )
    cons += hermitian_equality(
        d_in,
        [(0, lift_input(n, d_out, d_in))],
        rhs=np.eye(d_in) / d_in + d_out**n * t0 * np.eye(d_in),
        scalar_terms=[(0, lambda h: d_out**n * np.trace(h).real)],
    )
    prob = SdpProblem(
        blocks=[full],
        objective=[np.zeros((full, full), dtype=complex)],
        constraints=cons,
        scalar_costs=[-1.0],
    )
    start = [ghat - (u0 - t0) * np.eye(full)]
    sol = solve(prob, options, initial_blocks=start, initial_scalars=[u0])
    _require_optimal(sol, "channel compatibility")
    margin = sol.scalar_values[0] - t0
    joint = None
    if margin >= -MARGIN_TOL:
        g = hermitize(sol.block_values[0]) + margin * np.eye(full)
        joint = JointChannel(d_in, n, d_out, snap_choi_matrix(g, d_in, d_out**n))
    return CompatibilityVerdict(margin >= -MARGIN_TOL, margin, joint)


def check_pair(povm: Povm, channel: ChoiMatrix,
               options: SolveOptions | None = None) -> CompatibilityVerdict:
    """Decide whether one instrument induces both the measurement and the channel."""
    povm.validate()
    channel.validate()
    if povm.dim != channel.dim_in:
        raise ContractError("measurement and channel act on different input spaces")
    d, dp, o = channel.dim_in, channel.dim_out, povm.outcomes
    full = dp * d

    jhat = [
        np.kron(np.eye(dp) / dp, m.T / d)
        + (channel.matrix - np.kron(np.eye(dp) / dp, np.eye(d) / d)) / o
        for m in povm.elements
    ]
    floor = min(np.linalg.eigvalsh(j)[0] for j in jhat)
    t0 = -min(0.0, floor) + 1.0
    u0 = max(0.5, t0 + floor - 0.5)

    def povm_adjoint(h):
        # adjoint of J -> d * (Tr_out J)^T tested against h on the input space
        return d * embed_operator(h.T, (dp, d), (1,))

    cons = []
    for i, m in enumerate(povm.elements):
        cons += hermitian_equality(
            d,
            [(i, povm_adjoint)],
            rhs=m + d * dp * t0 * np.eye(d),
            scalar_terms=[(0, lambda h: d * dp * np.trace(h).real)],
        )
    cons += hermitian_equality(
        full,
        [(i, lambda h: h) for i in range(o)],
        rhs=channel.matrix + o * t0 * np.eye(full),
        scalar_terms=[(0, lambda h: o * np.trace(h).real)],
    )
    prob = SdpProblem(
        blocks=[full] * o,
        objective=[np.zeros((full, full), dtype=complex)] * o,
        constraints=cons,
        scalar_costs=[-1.0],
    )
    start = [j - (u0 - t0) * np.eye(full) for j in jhat]
    sol = solve(prob, options, initial_blocks=start, initial_scalars=[u0])
    _require_optimal(sol, "pair compatibility")
    margin = sol.scalar_values[0] - t0
    joint = None
    if margin >= -MARGIN_TOL:
        els = [hermitize(b) + margin * np.eye(full) for b in sol.block_values]
        joint = snap_instrument(els, d, dp)
    return CompatibilityVerdict(margin >= -MARGIN_TOL, margin, joint)
