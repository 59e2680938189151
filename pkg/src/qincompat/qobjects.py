"""Quantum objects: states, POVMs, channels in Choi form, instruments, and
multi-output joint channels, plus canonical constructions and samplers.

Choi matrices are normalized to unit trace and ordered output-first: the
matrix of a channel from an input space of dimension ``dim_in`` to an output
space of dimension ``dim_out`` acts on (output) (x) (input).  A joint channel
with n outputs acts on (out_1) (x) ... (x) (out_n) (x) (input).  Classical
outcomes are embedded as the first computational basis states of a genuine
output space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    ContractError,
    DimensionError,
    hermitize,
    kron,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    require_hermitian,
    swap_matrix,
)

NORM_TOL = 1e-9


def max_entangled_state(d: int) -> np.ndarray:
    """Density matrix of the canonical maximally entangled state on C^d (x) C^d."""
    if d < 2:
        raise DimensionError(f"maximally entangled state needs dimension >= 2, got {d}")
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        v[i * d + i] = 1.0
    v /= np.sqrt(d)
    return np.outer(v, v.conj())


@dataclass(eq=False)
class ChoiMatrix:
    """Trace-one Choi matrix of a channel, on (output) (x) (input)."""

    dim_in: int
    dim_out: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = self.dim_in * self.dim_out
        if self.matrix.shape != (d, d):
            raise DimensionError(
                f"Choi matrix shape {self.matrix.shape} does not match dims "
                f"{self.dim_out}x{self.dim_in}"
            )

    def validate(self, tol: float = NORM_TOL) -> "ChoiMatrix":
        m = require_hermitian(self.matrix, what="Choi matrix")
        w = np.linalg.eigvalsh(m)
        if w[0] < -tol:
            raise ContractError(f"Choi matrix is not PSD (min eigenvalue {w[0]:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > tol:
            raise ContractError(f"Choi matrix trace is {tr}, expected 1")
        marg = partial_trace(m, (self.dim_out, self.dim_in), (1,))
        dev = np.abs(marg - np.eye(self.dim_in) / self.dim_in).max()
        if dev > tol:
            raise ContractError(f"input marginal deviates from I/d by {dev:.3e}")
        return self

    def to_json(self) -> dict:
        return {
            "kind": "choi",
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "matrix": matrix_to_json(self.matrix),
        }

    @staticmethod
    def from_json(obj) -> "ChoiMatrix":
        try:
            c = ChoiMatrix(int(obj["dim_in"]), int(obj["dim_out"]), matrix_from_json(obj["matrix"]))
        except (KeyError, TypeError) as e:
            raise ContractError(f"malformed channel object: {e}")
        return c.validate()


def choi_from_kraus(kraus, dim_in: int | None = None) -> ChoiMatrix:
    """Choi matrix of the channel with the given Kraus operators."""
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise ContractError("need at least one Kraus operator")
    dout, din = ops[0].shape
    if dim_in is not None and din != dim_in:
        raise DimensionError(f"Kraus input dimension {din} != declared {dim_in}")
    tp = sum(k.conj().T @ k for k in ops)
    if np.abs(tp - np.eye(din)).max() > 1e-9:
        raise ContractError("Kraus operators are not trace preserving")
    j = np.zeros((dout * din, dout * din), dtype=complex)
    for k in ops:
        v = k.ravel()
        j += np.outer(v, v.conj())
    return ChoiMatrix(din, dout, j / din)


def identity_channel(d: int) -> ChoiMatrix:
    return ChoiMatrix(d, d, max_entangled_state(d))


def unitary_channel(u) -> ChoiMatrix:
    u = np.asarray(u, dtype=complex)
    return choi_from_kraus([u])


def depolarizing_channel(d: int, visibility: float) -> ChoiMatrix:
    """rho -> visibility * rho + (1 - visibility) * I/d."""
    if not 0.0 <= visibility <= 1.0:
        raise ContractError(f"visibility must lie in [0, 1], got {visibility}")
    j = visibility * max_entangled_state(d) + (1 - visibility) * np.eye(d * d) / d**2
    return ChoiMatrix(d, d, j)


def constant_channel(d_in: int, sigma) -> ChoiMatrix:
    """Channel discarding its input and preparing the state ``sigma``."""
    sigma = require_hermitian(sigma, what="prepared state")
    if abs(np.trace(sigma).real - 1.0) > NORM_TOL:
        raise ContractError("prepared state must have unit trace")
    return ChoiMatrix(d_in, sigma.shape[0], kron(sigma, np.eye(d_in) / d_in))


def apply_channel(choi: ChoiMatrix, rho) -> np.ndarray:
    """Image of a state under the channel: d * Tr_in[J (I (x) rho^T)]."""
    rho = np.asarray(rho, dtype=complex)
    d = choi.dim_in
    if rho.shape != (d, d):
        raise DimensionError(f"state shape {rho.shape} does not match input dimension {d}")
    op = choi.matrix @ kron(np.eye(choi.dim_out), rho.T)
    return d * partial_trace(op, (choi.dim_out, d), (0,))


def apply_channel_extended(choi: ChoiMatrix, rho) -> np.ndarray:
    """Apply the channel to the first half of a state on (input) (x) (input)."""
    rho = np.asarray(rho, dtype=complex)
    d = choi.dim_in
    if rho.shape != (d * d, d * d):
        raise DimensionError(f"state shape {rho.shape} does not match two copies of dim {d}")
    t = rho.reshape(d, d, d, d)  # (a b | a' b')
    rho_ta = np.ascontiguousarray(t.transpose(2, 1, 0, 3).reshape(d * d, d * d))
    op = kron(choi.matrix, np.eye(d)) @ kron(np.eye(choi.dim_out), rho_ta)
    return d * partial_trace(op, (choi.dim_out, d, d), (0, 2))


@dataclass(eq=False)
class Povm:
    """Positive operator valued measure: PSD effects summing to the identity."""

    elements: list

    def __post_init__(self):
        self.elements = [np.asarray(m, dtype=complex) for m in self.elements]
        if not self.elements:
            raise DimensionError("a measurement needs at least one outcome")
        d = self.elements[0].shape[0]
        for m in self.elements:
            if m.shape != (d, d):
                raise DimensionError("all effects must be square with a common dimension")

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def outcomes(self) -> int:
        return len(self.elements)

    def validate(self, tol: float = NORM_TOL) -> "Povm":
        total = np.zeros((self.dim, self.dim), dtype=complex)
        for i, m in enumerate(self.elements):
            m = require_hermitian(m, what=f"effect {i}")
            if np.linalg.eigvalsh(m)[0] < -tol:
                raise ContractError(f"effect {i} is not PSD")
            total += m
        if np.abs(total - np.eye(self.dim)).max() > tol:
            raise ContractError("effects do not sum to the identity")
        return self

    def to_json(self) -> dict:
        return {"kind": "povm", "dim": self.dim,
                "elements": [matrix_to_json(m) for m in self.elements]}

    @staticmethod
    def from_json(obj) -> "Povm":
        try:
            p = Povm([matrix_from_json(m) for m in obj["elements"]])
        except (KeyError, TypeError) as e:
            raise ContractError(f"malformed measurement object: {e}")
        return p.validate()


@dataclass(eq=False)
class PovmCollection:
    """Finite family of measurements on a common space, one per setting."""

    povms: list

    def __post_init__(self):
        if not self.povms:
            raise DimensionError("a collection needs at least one measurement")
        d = self.povms[0].dim
        if any(p.dim != d for p in self.povms):
            raise DimensionError("all measurements must share one space")

    @property
    def n(self) -> int:
        return len(self.povms)

    @property
    def dim(self) -> int:
        return self.povms[0].dim

    @property
    def outcomes(self) -> int:
        return max(p.outcomes for p in self.povms)

    def validate(self, tol: float = NORM_TOL) -> "PovmCollection":
        for p in self.povms:
            p.validate(tol)
        return self

    def to_json(self) -> dict:
        return {"kind": "povm_collection", "povms": [p.to_json() for p in self.povms]}

    @staticmethod
    def from_json(obj) -> "PovmCollection":
        try:
            return PovmCollection([Povm.from_json(p) for p in obj["povms"]])
        except (KeyError, TypeError) as e:
            raise ContractError(f"malformed measurement collection: {e}")


def basis_povm(d: int) -> Povm:
    """Projective measurement in the computational basis."""
    els = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        els.append(e)
    return Povm(els)


def projective_from_hermitian(h) -> Povm:
    """Rank-one projective measurement onto the eigenbasis of ``h``."""
    h = require_hermitian(h, what="observable")
    _, v = np.linalg.eigh(h)
    return Povm([np.outer(v[:, k], v[:, k].conj()) for k in range(h.shape[0])])


def qc_channel(povm: Povm) -> ChoiMatrix:
    """Measure-and-record channel writing the outcome into basis states."""
    d, o = povm.dim, povm.outcomes
    j = np.zeros((o * d, o * d), dtype=complex)
    for i, m in enumerate(povm.elements):
        e = np.zeros((o, o), dtype=complex)
        e[i, i] = 1.0
        j += kron(e, m.T)
    return ChoiMatrix(d, o, j / d)


@dataclass(eq=False)
class Instrument:
    """Measurement with a quantum output: one subnormalized Choi per outcome."""

    dim_in: int
    dim_out: int
    elements: list

    def __post_init__(self):
        self.elements = [np.asarray(m, dtype=complex) for m in self.elements]
        d = self.dim_in * self.dim_out
        if not self.elements:
            raise DimensionError("an instrument needs at least one outcome")
        for m in self.elements:
            if m.shape != (d, d):
                raise DimensionError("instrument element has wrong shape")

    @property
    def outcomes(self) -> int:
        return len(self.elements)

    def validate(self, tol: float = NORM_TOL) -> "Instrument":
        for i, m in enumerate(self.elements):
            m = require_hermitian(m, what=f"instrument element {i}")
            if np.linalg.eigvalsh(m)[0] < -tol:
                raise ContractError(f"instrument element {i} is not PSD")
        ChoiMatrix(self.dim_in, self.dim_out, sum(self.elements)).validate(tol)
        return self

    def to_json(self) -> dict:
        return {"kind": "instrument", "dim_in": self.dim_in, "dim_out": self.dim_out,
                "elements": [matrix_to_json(m) for m in self.elements]}

    @staticmethod
    def from_json(obj) -> "Instrument":
        try:
            ins = Instrument(int(obj["dim_in"]), int(obj["dim_out"]),
                             [matrix_from_json(m) for m in obj["elements"]])
        except (KeyError, TypeError) as e:
            raise ContractError(f"malformed instrument object: {e}")
        return ins.validate()


def instrument_povm(instr: Instrument) -> Povm:
    """The measurement the instrument induces on its input."""
    els = []
    for m in instr.elements:
        els.append(instr.dim_in * partial_trace(m, (instr.dim_out, instr.dim_in), (1,)).T)
    return Povm(els)


def instrument_total(instr: Instrument) -> ChoiMatrix:
    """The overall channel obtained by forgetting the outcome."""
    return ChoiMatrix(instr.dim_in, instr.dim_out, sum(instr.elements))


def lueders_instrument(povm: Povm) -> Instrument:
    """Square-root instrument of a measurement, outcome state kept on the same space."""
    d = povm.dim
    els = []
    for m in povm.elements:
        m = hermitize(m)
        w, v = np.linalg.eigh(m)
        root = v @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        vec = root.ravel()
        els.append(np.outer(vec, vec.conj()) / d)
    return Instrument(d, d, els)


@dataclass(eq=False)
class JointChannel:
    """One channel with n outputs of a common dimension, stored as a Choi matrix."""

    dim_in: int
    n_outputs: int
    dim_out: int
    choi: np.ndarray

    def __post_init__(self):
        self.choi = np.asarray(self.choi, dtype=complex)
        d = self.dim_out**self.n_outputs * self.dim_in
        if self.choi.shape != (d, d):
            raise DimensionError(f"joint Choi shape {self.choi.shape} does not match dims")

    @property
    def shape(self):
        return (self.dim_out,) * self.n_outputs + (self.dim_in,)

    def validate(self, tol: float = NORM_TOL) -> "JointChannel":
        m = require_hermitian(self.choi, what="joint Choi matrix")
        if np.linalg.eigvalsh(m)[0] < -tol:
            raise ContractError("joint Choi matrix is not PSD")
        if abs(np.trace(m).real - 1.0) > tol:
            raise ContractError("joint Choi matrix must have unit trace")
        marg = partial_trace(m, self.shape, (self.n_outputs,))
        if np.abs(marg - np.eye(self.dim_in) / self.dim_in).max() > tol:
            raise ContractError("joint input marginal deviates from I/d")
        return self

    def to_json(self) -> dict:
        return {"kind": "joint_channel", "dim_in": self.dim_in,
                "n_outputs": self.n_outputs, "dim_out": self.dim_out,
                "choi": matrix_to_json(self.choi)}

    @staticmethod
    def from_json(obj) -> "JointChannel":
        try:
            j = JointChannel(int(obj["dim_in"]), int(obj["n_outputs"]),
                             int(obj["dim_out"]), matrix_from_json(obj["choi"]))
        except (KeyError, TypeError) as e:
            raise ContractError(f"malformed joint channel object: {e}")
        return j.validate()


def marginal(joint: JointChannel, x: int) -> ChoiMatrix:
    """Choi matrix of the x-th output (1-based), the others traced out."""
    if not 1 <= x <= joint.n_outputs:
        raise DimensionError(f"output index {x} out of range 1..{joint.n_outputs}")
    m = partial_trace(joint.choi, joint.shape, (x - 1, joint.n_outputs))
    return ChoiMatrix(joint.dim_in, joint.dim_out, m)


def symmetric_projector(d: int) -> np.ndarray:
    return (np.eye(d * d) + swap_matrix(d)) / 2


def cloning_channel(d: int) -> JointChannel:
    """Optimal symmetric 1-to-2 cloner on C^d."""
    s = symmetric_projector(d)
    scale = np.sqrt(2.0 / (d + 1))
    kraus = []
    for k in range(d):
        e = np.zeros((d, 1), dtype=complex)
        e[k, 0] = 1.0
        kraus.append(scale * (s @ kron(np.eye(d), e)))
    c = choi_from_kraus(kraus)
    return JointChannel(d, 2, d, c.matrix)


def pad_choi(choi: ChoiMatrix, dim_out: int) -> ChoiMatrix:
    """Isometrically enlarge the output space to ``dim_out``."""
    if dim_out < choi.dim_out:
        raise DimensionError("padding cannot shrink the output space")
    if dim_out == choi.dim_out:
        return choi
    v = np.zeros((dim_out, choi.dim_out), dtype=complex)
    v[: choi.dim_out] = np.eye(choi.dim_out)
    iso = kron(v, np.eye(choi.dim_in))
    return ChoiMatrix(choi.dim_in, dim_out, iso @ choi.matrix @ iso.conj().T)


# -- polish helpers for solver output ---------------------------------------
#
# Interior point iterates satisfy the defining equalities only to solver
# tolerance; these snap them onto the exactly normalized sets so the strict
# type validators accept them.  The perturbation is on the order of the
# solver residual.

def snap_povm(elements) -> Povm:
    clipped = []
    for m in elements:
        m = hermitize(m)
        w, v = np.linalg.eigh(m)
        clipped.append(v @ np.diag(np.clip(w, 0.0, None)) @ v.conj().T)
    total = hermitize(sum(clipped))
    w, v = np.linalg.eigh(total)
    if w[0] <= 1e-12:
        raise ContractError("effect sum is singular, cannot renormalize")
    inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T
    return Povm([inv_root @ m @ inv_root for m in clipped])


def snap_choi_matrix(matrix, dim_in: int, dim_out_total: int) -> np.ndarray:
    m = hermitize(matrix)
    for _ in range(3):
        w, v = np.linalg.eigh(m)
        m = v @ np.diag(np.clip(w, 0.0, None)) @ v.conj().T
        tr = np.trace(m).real
        if tr > 1e-12:
            m = m / tr
        marg = partial_trace(m, (dim_out_total, dim_in), (1,))
        m = m + kron(np.eye(dim_out_total) / dim_out_total,
                     np.eye(dim_in) / dim_in - marg)
        m = hermitize(m)
    return m


def snap_instrument(elements, dim_in: int, dim_out: int) -> Instrument:
    o = len(elements)
    clipped = []
    for m in elements:
        m = hermitize(m)
        w, v = np.linalg.eigh(m)
        clipped.append(v @ np.diag(np.clip(w, 0.0, None)) @ v.conj().T)
    total = sum(clipped)
    tr = np.trace(total).real
    if tr > 1e-12:
        clipped = [m / tr for m in clipped]
        total = total / tr
    marg = partial_trace(total, (dim_out, dim_in), (1,))
    fix = kron(np.eye(dim_out) / dim_out, np.eye(dim_in) / dim_in - marg) / o
    return Instrument(dim_in, dim_out, [m + fix for m in clipped])


# -- samplers ----------------------------------------------------------------


def random_pure_state(d: int, rng) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_state(d: int, rng) -> np.ndarray:
    """Full-rank state: partial trace of a random pure state on two copies."""
    pure = random_pure_state(d * d, rng)
    return partial_trace(pure, (d, d), (0,))


def random_unitary(d: int, rng) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_povm(d: int, outcomes: int, rng) -> Povm:
    """Projective effects from a random eigenbasis, grouped round-robin."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (g + g.conj().T) / 2
    _, v = np.linalg.eigh(h)
    els = [np.zeros((d, d), dtype=complex) for _ in range(outcomes)]
    for k in range(d):
        els[k % outcomes] += np.outer(v[:, k], v[:, k].conj())
    return Povm(els)


def random_channel(d_in: int, d_out: int, kraus_rank: int, rng) -> ChoiMatrix:
    """Channel from a random isometry into output (x) environment."""
    if d_out * kraus_rank < d_in:
        raise DimensionError("d_out * kraus_rank must be at least d_in")
    g = rng.standard_normal((d_out * kraus_rank, d_in)) + 1j * rng.standard_normal(
        (d_out * kraus_rank, d_in)
    )
    v, _ = np.linalg.qr(g)
    v3 = v.reshape(d_out, kraus_rank, d_in)
    return choi_from_kraus([v3[:, k, :] for k in range(kraus_rank)])


def random_joint_channel(d_in: int, n_outputs: int, d_out: int, rng,
                         kraus_rank: int = 2) -> JointChannel:
    big = random_channel(d_in, d_out**n_outputs, kraus_rank, rng)
    return JointChannel(d_in, n_outputs, d_out, big.matrix)


def object_from_json(obj):
    """Dispatch on the ``kind`` tag of a serialized quantum object."""
    kinds = {
        "choi": ChoiMatrix.from_json,
        "povm": Povm.from_json,
        "povm_collection": PovmCollection.from_json,
        "instrument": Instrument.from_json,
        "joint_channel": JointChannel.from_json,
    }
    try:
        kind = obj["kind"]
    except (KeyError, TypeError):
        raise ContractError("object has no kind tag")
    if kind not in kinds:
        raise ContractError(f"unknown object kind {kind!r}")
    return kinds[kind](obj)
