"""Generalized robustness of incompatibility and its dual witnesses.

For a collection of channels (or measurements, or a measurement-channel
pair), the robustness is the least s such that mixing every member with
weight s/(1+s) of some arbitrary noise collection makes the result
compatible.  Three conic programs compute it:

* the primal searches for a scaled joint object dominating the inputs
  marginal by marginal; its optimal value is 1 + s and its blocks yield the
  noise collection and the certifying compatible mixture;
* the dual maximizes a linear functional over witness operators normalized
  so that every compatible collection scores at most one; its optimum equals
  the primal's by strong duality (both cones have strictly feasible points,
  which are also injected as solver starting points).

The two routes are encoded independently and solved separately, so agreement
of their values is a genuine numerical cross-check, reported as ``gap``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compat import MAX_SETTINGS, assignments, lift_input, lift_setting
from .linalg import ContractError, hermitian_basis, hermitize, kron
from .qobjects import (
    ChoiMatrix,
    Instrument,
    JointChannel,
    Povm,
    PovmCollection,
    pad_choi,
    qc_channel,
    snap_choi_matrix,
    snap_instrument,
    snap_povm,
)
from .sdp import LinearConstraint, SdpProblem, SolveOptions, SolverFailure, hermitian_equality, solve

# below this the optimal mixing weight is numerically zero and dividing the
# slack blocks by it would amplify solver noise, so no noise is reconstructed
ZERO_NOISE_TOL = 1e-7


@dataclass
class WitnessSet:
    """Dual witness: PSD operators whose functional is at most 1 on every
    compatible collection and 1 + robustness on the certified one.

    ``value`` is the certified robustness (functional minus one)."""

    kind: str
    value: float
    channel_ops: list | None = None
    measurement_ops: list | None = None
    pair_measure_ops: list | None = None
    pair_channel_op: np.ndarray | None = None

    def evaluate(self, *objects) -> float:
        """Witness functional on a collection of the matching kind."""
        if self.kind == "channels":
            (chois,) = objects
            return float(
                sum(np.trace(a @ c.matrix).real for a, c in zip(self.channel_ops, chois))
            )
        if self.kind == "measurements":
            (collection,) = objects
            total = 0.0
            for ops, povm in zip(self.measurement_ops, collection.povms):
                for a, m in zip(ops, povm.elements):
                    total += np.trace(a @ m).real
            return float(total)
        if self.kind == "pair":
            povm, choi = objects
            total = sum(
                np.trace(a @ m).real for a, m in zip(self.pair_measure_ops, povm.elements)
            )
            total += np.trace(self.pair_channel_op @ choi.matrix).real
            return float(total)
        raise ContractError(f"unknown witness kind {self.kind!r}")

    def to_json(self) -> dict:
        from .linalg import matrix_to_json

        out = {"kind": self.kind, "value": self.value}
        if self.channel_ops is not None:
            out["channel_ops"] = [matrix_to_json(a) for a in self.channel_ops]
        if self.measurement_ops is not None:
            out["measurement_ops"] = [
                [matrix_to_json(a) for a in row] for row in self.measurement_ops
            ]
        if self.pair_measure_ops is not None:
            out["pair_measure_ops"] = [matrix_to_json(a) for a in self.pair_measure_ops]
        if self.pair_channel_op is not None:
            out["pair_channel_op"] = matrix_to_json(self.pair_channel_op)
        return out


@dataclass
class RobustnessReport:
    kind: str
    primal_value: float
    dual_value: float
    gap: float
    witness: WitnessSet
    noise: object | None
    mixture_joint: object
    solver: dict

    def to_json(self) -> dict:
        noise = None
        if self.noise is not None:
            if self.kind == "channels":
                noise = {"channels": [c.to_json() for c in self.noise]}
            elif self.kind == "measurements":
                noise = self.noise.to_json()
            else:
                povm, choi = self.noise
                noise = {"povm": povm.to_json(), "channel": choi.to_json()}
        joint = self.mixture_joint.to_json() if self.mixture_joint is not None else None
        return {
            "kind": self.kind,
            "robustness": self.primal_value,
            "dual": self.dual_value,
            "gap": self.gap,
            "witness": self.witness.to_json(),
            "noise": noise,
            "mixture_joint": joint,
            "solver": self.solver,
        }


def identity_pair_closed_form(d: int) -> float:
    """Robustness of two identity channels on C^d."""
    return (d - 1) / (d + 1)


def _require_optimal(sol, what):
    if sol.status != "optimal":
        raise SolverFailure(f"{what} solve ended with status {sol.status}", sol)


class _DualForm:
    """Assemble a standard-form problem whose Lagrange dual is the witness
    program: maximize sum of weights against Hermitian parameters subject to
    slack blocks F0 + sum_k y_k F_k >= 0."""

    def __init__(self):
        self.blocks: list[int] = []
        self.objective: list[np.ndarray] = []
        self.real: set[int] = set()
        self.params: list[tuple[int, np.ndarray | None, list]] = []

    def slack(self, dim, f0, real=False) -> int:
        self.blocks.append(dim)
        self.objective.append(np.asarray(f0, dtype=complex))
        if real:
            self.real.add(len(self.blocks) - 1)
        return len(self.blocks) - 1

    def param(self, dim, weight=None) -> int:
        self.params.append((dim, weight, []))
        return len(self.params) - 1

    def couple(self, param, block, fn):
        self.params[param][2].append((block, fn))

    def problem(self) -> SdpProblem:
        cons = []
        for dim, weight, maps in self.params:
            for h in hermitian_basis(dim):
                coeffs = {}
                for block, fn in maps:
                    m = -fn(h)
                    coeffs[block] = coeffs[block] + m if block in coeffs else m
                rhs = 0.0 if weight is None else float(np.trace(h @ weight).real)
                cons.append(LinearConstraint(coeffs, rhs))
        return SdpProblem(
            blocks=list(self.blocks),
            objective=list(self.objective),
            constraints=cons,
            real_blocks=frozenset(self.real),
        )


def _check_channel_family(channels):
    chois = [c.validate() for c in channels]
    n = len(chois)
    if n < 1:
        raise ContractError("need at least one channel")
    if n > MAX_SETTINGS:
        raise ContractError(f"at most {MAX_SETTINGS} channels supported, got {n}")
    d, dp = chois[0].dim_in, chois[0].dim_out
    if any(c.dim_in != d or c.dim_out != dp for c in chois):
        raise ContractError("all channels must share input and output dimensions")
    return chois, n, d, dp


def _channel_slater(chois, n, d, dp):
    tau0 = 2.0 * dp * d * max(np.linalg.eigvalsh(c.matrix)[-1] for c in chois) + 1.0
    full = dp**n * d
    g0 = tau0 * np.eye(full) / (dp**n * d)
    zs = [tau0 / (dp * d) * np.eye(dp * d) - c.matrix for c in chois]
    return tau0, g0, zs


def robustness_channels_primal(channels, options: SolveOptions | None = None) -> RobustnessReport:
    """Robustness of a channel collection, with noise and mixture reconstruction."""
    chois, n, d, dp = _check_channel_family(channels)
    full = dp**n * d

    cons = []
    for x, c in enumerate(chois):
        cons += hermitian_equality(
            dp * d,
            [(0, lift_setting(n, dp, d, x)), (1 + x, lambda h: -h)],
            rhs=c.matrix,
        )
    cons += hermitian_equality(
        d,
        [(0, lift_input(n, dp, d))],
        scalar_terms=[(0, lambda h: -np.trace(h).real / d)],
    )
    prob = SdpProblem(
        blocks=[full] + [dp * d] * n,
        objective=[np.eye(full, dtype=complex)] + [np.zeros((dp * d, dp * d), dtype=complex)] * n,
        constraints=cons,
        scalar_costs=[0.0],
    )
    tau0, g0, zs = _channel_slater(chois, n, d, dp)
    sol = solve(prob, options, initial_blocks=[g0] + zs, initial_scalars=[tau0])
    _require_optimal(sol, "channel robustness primal")

    r = sol.primal_value - 1.0
    tau = sol.scalar_values[0]
    witness = robustness_channels_dual(channels, options)
    mixture = JointChannel(
        d, n, dp, snap_choi_matrix(sol.block_values[0] / tau, d, dp**n)
    )
    noise = None
    if r > ZERO_NOISE_TOL:
        noise = [
            ChoiMatrix(d, dp, snap_choi_matrix(sol.block_values[1 + x] / r, d, dp))
            for x in range(n)
        ]
    opts = options or SolveOptions()
    return RobustnessReport(
        kind="channels",
        primal_value=r,
        dual_value=witness.value,
        gap=abs(r - witness.value),
        witness=witness,
        noise=noise,
        mixture_joint=mixture,
        solver={"primal_iterations": sol.iterations, "feas_tol": opts.feas_tol,
                "gap_tol": opts.gap_tol},
    )


def robustness_channels_dual(channels, options: SolveOptions | None = None) -> WitnessSet:
    """Witness operators certifying the robustness of a channel collection."""
    chois, n, d, dp = _check_channel_family(channels)
    full = dp**n * d

    df = _DualForm()
    z = df.slack(full, np.zeros((full, full)))
    ps = [df.slack(dp * d, np.zeros((dp * d, dp * d))) for _ in range(n)]
    u = df.slack(1, np.array([[float(d)]]), real=True)
    for x in range(n):
        a = df.param(dp * d, weight=chois[x].matrix)
        df.couple(a, z, lambda h, x=x: -lift_setting(n, dp, d, x)(h))
        df.couple(a, ps[x], lambda h: h)
    yv = df.param(d)
    df.couple(yv, z, lift_input(n, dp, d))
    df.couple(yv, u, lambda h: -np.array([[np.trace(h).real]]))

    tau0, g0, zs = _channel_slater(chois, n, d, dp)
    start = [g0] + zs + [np.array([[tau0 / d]])]
    sol = solve(df.problem(), options, initial_blocks=start)
    _require_optimal(sol, "channel robustness dual")
    ops = [hermitize(sol.dual_blocks[p]) for p in ps]
    return WitnessSet("channels", sol.dual_value - 1.0, channel_ops=ops)


def _measurement_grid(collection: PovmCollection):
    o, d = collection.outcomes, collection.dim
    grid = []
    for p in collection.povms:
        row = [np.asarray(m, dtype=complex) for m in p.elements]
        row += [np.zeros((d, d), dtype=complex)] * (o - len(row))
        grid.append(row)
    return grid


def robustness_measurements(collection: PovmCollection,
                            options: SolveOptions | None = None) -> RobustnessReport:
    """Robustness of a measurement collection, primal and dual routes."""
    collection.validate()
    n, o, d = collection.n, collection.outcomes, collection.dim
    lam = assignments(o, n)
    grid = _measurement_grid(collection)
    nl = len(lam)

    cons = hermitian_equality(
        d,
        [(k, lambda h: h) for k in range(nl)],
        scalar_terms=[(0, lambda h: -np.trace(h).real)],
    )
    for x in range(n):
        for i in range(o):
            members = [k for k, l in enumerate(lam) if l[x] == i]
            cons += hermitian_equality(
                d,
                [(k, lambda h: h) for k in members] + [(nl + x * o + i, lambda h: -h)],
                rhs=grid[x][i],
            )
    prob = SdpProblem(
        blocks=[d] * nl + [d] * (n * o),
        objective=[np.zeros((d, d), dtype=complex)] * (nl + n * o),
        constraints=cons,
        scalar_costs=[1.0],
    )
    c0 = 2.0 / o ** (n - 1)
    start = [c0 * np.eye(d)] * nl + [
        o ** (n - 1) * c0 * np.eye(d) - grid[x][i] for x in range(n) for i in range(o)
    ]
    sol = solve(prob, options, initial_blocks=start, initial_scalars=[o**n * c0])
    _require_optimal(sol, "measurement robustness primal")

    t = sol.scalar_values[0]
    r = sol.primal_value - 1.0
    witness = _measurements_dual(collection, options)
    parent = snap_povm([b / t for b in sol.block_values[:nl]])
    noise = None
    if r > ZERO_NOISE_TOL:
        noise = PovmCollection([
            snap_povm([sol.block_values[nl + x * o + i] / r for i in range(o)])
            for x in range(n)
        ])
    opts = options or SolveOptions()
    return RobustnessReport(
        kind="measurements",
        primal_value=r,
        dual_value=witness.value,
        gap=abs(r - witness.value),
        witness=witness,
        noise=noise,
        mixture_joint=parent,
        solver={"primal_iterations": sol.iterations, "feas_tol": opts.feas_tol,
                "gap_tol": opts.gap_tol},
    )


def _measurements_dual(collection: PovmCollection,
                       options: SolveOptions | None = None) -> WitnessSet:
    n, o, d = collection.n, collection.outcomes, collection.dim
    lam = assignments(o, n)
    grid = _measurement_grid(collection)

    df = _DualForm()
    zs = [df.slack(d, np.zeros((d, d))) for _ in lam]
    ps = [[df.slack(d, np.zeros((d, d))) for _ in range(o)] for _ in range(n)]
    u = df.slack(1, np.array([[1.0]]), real=True)
    for x in range(n):
        for i in range(o):
            a = df.param(d, weight=grid[x][i])
            for k, l in enumerate(lam):
                if l[x] == i:
                    df.couple(a, zs[k], lambda h: -h)
            df.couple(a, ps[x][i], lambda h: h)
    yv = df.param(d)
    for k in range(len(lam)):
        df.couple(yv, zs[k], lambda h: h)
    df.couple(yv, u, lambda h: -np.array([[np.trace(h).real]]))

    c0 = 2.0 / o ** (n - 1)
    start = (
        [c0 * np.eye(d)] * len(lam)
        + [o ** (n - 1) * c0 * np.eye(d) - grid[x][i] for x in range(n) for i in range(o)]
        + [np.array([[o**n * c0 / 1.0]])]
    )
    sol = solve(df.problem(), options, initial_blocks=start)
    _require_optimal(sol, "measurement robustness dual")
    ops = [[hermitize(sol.dual_blocks[ps[x][i]]) for i in range(o)] for x in range(n)]
    return WitnessSet("measurements", sol.dual_value - 1.0, measurement_ops=ops)


def robustness_measurements_dual(collection: PovmCollection,
                                 options: SolveOptions | None = None) -> WitnessSet:
    collection.validate()
    return _measurements_dual(collection, options)


def _check_pair(povm: Povm, channel: ChoiMatrix):
    povm.validate()
    channel.validate()
    if povm.dim != channel.dim_in:
        raise ContractError("measurement and channel act on different input spaces")
    return channel.dim_in, channel.dim_out, povm.outcomes


def _pair_povm_adjoint(d, dp):
    def fn(h):
        return d * kron(np.eye(dp), h.T)

    return fn


def _pair_slater(povm, channel, d, dp, o):
    c0 = 2.0 * max(1.0 / (d * dp), 1.0 / o)
    full = dp * d
    js = [c0 * np.eye(full)] * o
    fs = [c0 * d * dp * np.eye(d) - m for m in povm.elements]
    w = o * c0 * np.eye(full) - channel.matrix
    return c0, js, fs, w


def robustness_pair_primal(povm: Povm, channel: ChoiMatrix,
                           options: SolveOptions | None = None) -> RobustnessReport:
    """Robustness of a measurement-channel pair, with reconstruction."""
    d, dp, o = _check_pair(povm, channel)
    full = dp * d
    adj = _pair_povm_adjoint(d, dp)

    cons = []
    for i, m in enumerate(povm.elements):
        cons += hermitian_equality(
            d, [(i, adj), (o + i, lambda h: -h)], rhs=m,
        )
    cons += hermitian_equality(
        full,
        [(i, lambda h: h) for i in range(o)] + [(2 * o, lambda h: -h)],
        rhs=channel.matrix,
    )
    cons += hermitian_equality(
        d,
        [(i, lambda h: kron(np.eye(dp), h)) for i in range(o)],
        scalar_terms=[(0, lambda h: -np.trace(h).real / d)],
    )
    prob = SdpProblem(
        blocks=[full] * o + [d] * o + [full],
        objective=[np.zeros((full, full), dtype=complex)] * o
        + [np.zeros((d, d), dtype=complex)] * o
        + [np.zeros((full, full), dtype=complex)],
        constraints=cons,
        scalar_costs=[1.0],
    )
    c0, js, fs, w = _pair_slater(povm, channel, d, dp, o)
    sol = solve(prob, options, initial_blocks=js + fs + [w],
                initial_scalars=[c0 * o * dp * d])
    _require_optimal(sol, "pair robustness primal")

    t = sol.scalar_values[0]
    r = sol.primal_value - 1.0
    witness = robustness_pair_dual(povm, channel, options)
    mixture = snap_instrument([b / t for b in sol.block_values[:o]], d, dp)
    noise = None
    if r > ZERO_NOISE_TOL:
        noise_povm = snap_povm([sol.block_values[o + i] / r for i in range(o)])
        noise_choi = ChoiMatrix(d, dp, snap_choi_matrix(sol.block_values[2 * o] / r, d, dp))
        noise = (noise_povm, noise_choi)
    opts = options or SolveOptions()
    return RobustnessReport(
        kind="pair",
        primal_value=r,
        dual_value=witness.value,
        gap=abs(r - witness.value),
        witness=witness,
        noise=noise,
        mixture_joint=mixture,
        solver={"primal_iterations": sol.iterations, "feas_tol": opts.feas_tol,
                "gap_tol": opts.gap_tol},
    )


def robustness_pair_dual(povm: Povm, channel: ChoiMatrix,
                         options: SolveOptions | None = None) -> WitnessSet:
    """Witness operators certifying the robustness of a pair."""
    d, dp, o = _check_pair(povm, channel)
    full = dp * d

    df = _DualForm()
    zs = [df.slack(full, np.zeros((full, full))) for _ in range(o)]
    pa = [df.slack(d, np.zeros((d, d))) for _ in range(o)]
    pb = df.slack(full, np.zeros((full, full)))
    u = df.slack(1, np.array([[float(d)]]), real=True)
    for i in range(o):
        a = df.param(d, weight=povm.elements[i])
        df.couple(a, zs[i], lambda h: -d * kron(np.eye(dp), h.T))
        df.couple(a, pa[i], lambda h: h)
    bb = df.param(full, weight=channel.matrix)
    for i in range(o):
        df.couple(bb, zs[i], lambda h: -h)
    df.couple(bb, pb, lambda h: h)
    yv = df.param(d)
    for i in range(o):
        df.couple(yv, zs[i], lambda h: kron(np.eye(dp), h))
    df.couple(yv, u, lambda h: -np.array([[np.trace(h).real]]))

    c0, js, fs, w = _pair_slater(povm, channel, d, dp, o)
    start = js + fs + [w, np.array([[c0 * o * dp]])]
    sol = solve(df.problem(), options, initial_blocks=start)
    _require_optimal(sol, "pair robustness dual")
    a_ops = [hermitize(sol.dual_blocks[p]) for p in pa]
    b_op = hermitize(sol.dual_blocks[pb])
    return WitnessSet("pair", sol.dual_value - 1.0,
                      pair_measure_ops=a_ops, pair_channel_op=b_op)


def _padded_collection(collection: PovmCollection) -> list[Povm]:
    """Measurements padded with zero effects to a common outcome count."""
    grid = _measurement_grid(collection)
    return [Povm(row) for row in grid]


def verify_prop1(collection: PovmCollection,
                 options: SolveOptions | None = None) -> dict:
    """Measurement robustness against the channel robustness of the
    measure-and-record channels; the two must agree."""
    collection.validate()
    rm = robustness_measurements(collection, options)
    channels = [qc_channel(p) for p in _padded_collection(collection)]
    rc = robustness_channels_primal(channels, options)
    return {
        "measurement_robustness": rm.primal_value,
        "channel_robustness": rc.primal_value,
        "delta": abs(rm.primal_value - rc.primal_value),
    }


def verify_prop2(povm: Povm, channel: ChoiMatrix,
                 options: SolveOptions | None = None) -> dict:
    """Pair robustness against the channel-pair robustness of the
    measure-and-record channel together with the channel itself."""
    rp = robustness_pair_primal(povm, channel, options)
    gamma = qc_channel(povm)
    dim = max(gamma.dim_out, channel.dim_out)
    rc = robustness_channels_primal([pad_choi(gamma, dim), pad_choi(channel, dim)], options)
    return {
        "pair_robustness": rp.primal_value,
        "channel_robustness": rc.primal_value,
        "delta": abs(rp.primal_value - rc.primal_value),
    }
