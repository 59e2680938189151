"""Robustness programs: closed forms, duality, reconstructions, witnesses."""

import numpy as np
import pytest

from qincompat.compat import check_channels, check_measurements, check_pair
from qincompat.qobjects import (
    ChoiMatrix,
    Povm,
    PovmCollection,
    basis_povm,
    depolarizing_channel,
    identity_channel,
    instrument_total,
    lueders_instrument,
    marginal,
    projective_from_hermitian,
    qc_channel,
    random_channel,
    random_joint_channel,
    random_povm,
    random_unitary,
    unitary_channel,
)
from qincompat.robustness import (
    identity_pair_closed_form,
    robustness_channels_dual,
    robustness_channels_primal,
    robustness_measurements,
    robustness_pair_dual,
    robustness_pair_primal,
    verify_prop1,
    verify_prop2,
)

SZ = np.diag([1.0, -1.0]).astype(complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)


def mub_pair(visibility: float) -> PovmCollection:
    half = np.eye(2) / 2
    pz = Povm([visibility * (np.eye(2) + SZ) / 2 + (1 - visibility) * half,
               visibility * (np.eye(2) - SZ) / 2 + (1 - visibility) * half])
    px = Povm([visibility * (np.eye(2) + SX) / 2 + (1 - visibility) * half,
               visibility * (np.eye(2) - SX) / 2 + (1 - visibility) * half])
    return PovmCollection([pz, px])


def compatible_channel_pair(rng, d=2):
    j = random_joint_channel(d, 2, d, rng)
    return [marginal(j, 1), marginal(j, 2)]


def coarse_grained_pair(rng, d=2):
    # marginals of a common 4-outcome parent, compatible by construction
    parent = random_povm(d, 4, rng)
    q = parent.elements
    first = Povm([q[0] + q[1], q[2] + q[3]])
    second = Povm([q[0] + q[2], q[1] + q[3]])
    return PovmCollection([first, second])


def random_projective_pair(rng, d=2):
    ms = []
    for _ in range(2):
        h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        ms.append(projective_from_hermitian(h + h.conj().T))
    return PovmCollection(ms)


def test_identity_pair_matches_closed_form():
    for d in (2, 3):
        rep = robustness_channels_primal([identity_channel(d), identity_channel(d)])
        want = identity_pair_closed_form(d)
        assert abs(rep.primal_value - want) < 1e-6
        assert abs(rep.dual_value - want) < 1e-6
        assert rep.gap < 1e-6 * (1 + rep.primal_value)


def test_identity_pair_reconstruction():
    rep = robustness_channels_primal([identity_channel(2), identity_channel(2)])
    r = rep.primal_value
    rep.mixture_joint.validate()
    assert rep.noise is not None and len(rep.noise) == 2
    for x in range(2):
        rep.noise[x].validate()
        mixed = (identity_channel(2).matrix + r * rep.noise[x].matrix) / (1 + r)
        got = marginal(rep.mixture_joint, x + 1).matrix
        assert np.abs(got - mixed).max() < 1e-5


def test_channel_witness_scores_its_own_collection():
    chois = [identity_channel(2), identity_channel(2)]
    w = robustness_channels_dual(chois)
    assert abs(w.evaluate(chois) - (1 + w.value)) < 1e-5
    for a in w.channel_ops:
        assert np.linalg.eigvalsh(a)[0] > -1e-7


def test_channel_witness_normalization_on_compatible_samples():
    # the defining property: at most 1 on every compatible collection
    w = robustness_channels_dual([identity_channel(2), identity_channel(2)])
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        pair = compatible_channel_pair(rng)
        worst = max(worst, w.evaluate(pair))
    assert worst <= 1 + 1e-7


def test_channel_robustness_zero_iff_compatible():
    rng = np.random.default_rng(11)
    for _ in range(5):
        pair = compatible_channel_pair(rng)
        assert check_channels(pair).compatible
        rep = robustness_channels_primal(pair)
        assert rep.primal_value < 1e-6
        assert rep.noise is None
    for _ in range(5):
        pair = [unitary_channel(random_unitary(2, rng)) for _ in range(2)]
        assert not check_channels(pair).compatible
        rep = robustness_channels_primal(pair)
        assert rep.primal_value > 1e-4
        assert rep.gap < 1e-6 * (1 + rep.primal_value)


def test_channel_duality_on_random_pairs():
    rng = np.random.default_rng(23)
    for _ in range(3):
        pair = [random_channel(2, 2, 2, rng) for _ in range(2)]
        rep = robustness_channels_primal(pair)
        assert rep.gap < 1e-6 * (1 + rep.primal_value)


def test_depolarizing_self_pair_robustness():
    # self-compatibility boundary for a qubit sits at visibility 2/3
    lo = depolarizing_channel(2, 0.6)
    rep = robustness_channels_primal([lo, lo])
    assert rep.primal_value < 1e-7
    hi = depolarizing_channel(2, 0.9)
    rep = robustness_channels_primal([hi, hi])
    assert rep.primal_value > 1e-3


def test_measurement_robustness_mub_thresholds():
    rep = robustness_measurements(mub_pair(0.70))
    assert rep.primal_value < 1e-7
    rep = robustness_measurements(mub_pair(0.75))
    assert rep.primal_value > 1e-4
    assert rep.gap < 1e-6 * (1 + rep.primal_value)


def test_measurement_reconstruction():
    coll = mub_pair(1.0)
    rep = robustness_measurements(coll)
    r = rep.primal_value
    parent = rep.mixture_joint.validate()
    assert rep.noise is not None
    rep.noise.validate()
    lam_parent = parent.elements
    # parent coarse-grainings reproduce the noisy mixtures
    for x in range(2):
        for i in range(2):
            members = [k for k in range(4) if (k // 2, k % 2)[x] == i]
            got = sum(lam_parent[k] for k in members)
            want = (coll.povms[x].elements[i]
                    + r * rep.noise.povms[x].elements[i]) / (1 + r)
            assert np.abs(got - want).max() < 1e-5


def test_measurement_robustness_zero_iff_compatible():
    rng = np.random.default_rng(31)
    for _ in range(5):
        coll = coarse_grained_pair(rng)
        assert check_measurements(coll).compatible
        rep = robustness_measurements(coll)
        assert rep.primal_value < 1e-6
    for _ in range(5):
        coll = random_projective_pair(rng)
        assert not check_measurements(coll).compatible
        rep = robustness_measurements(coll)
        assert rep.primal_value > 1e-4
        assert rep.gap < 1e-6 * (1 + rep.primal_value)


def test_measurement_witness_normalization():
    w = robustness_measurements(mub_pair(1.0)).witness
    rng = np.random.default_rng(43)
    worst = 0.0
    for _ in range(100):
        worst = max(worst, w.evaluate(coarse_grained_pair(rng)))
    assert worst <= 1 + 1e-7


def test_pair_robustness_basic():
    rep = robustness_pair_primal(basis_povm(2), identity_channel(2))
    assert rep.primal_value > 1e-3
    assert rep.gap < 1e-6 * (1 + rep.primal_value)
    rep.mixture_joint.validate()
    r = rep.primal_value
    noise_povm, noise_choi = rep.noise
    noise_povm.validate()
    noise_choi.validate()
    # instrument marginals reproduce the noisy mixtures
    from qincompat.qobjects import instrument_povm
    got_povm = instrument_povm(rep.mixture_joint)
    for i in range(2):
        want = (basis_povm(2).elements[i] + r * noise_povm.elements[i]) / (1 + r)
        assert np.abs(got_povm.elements[i] - want).max() < 1e-5
    got_total = instrument_total(rep.mixture_joint)
    want = (identity_channel(2).matrix + r * noise_choi.matrix) / (1 + r)
    assert np.abs(got_total.matrix - want).max() < 1e-5


def test_pair_robustness_zero_iff_compatible():
    rng = np.random.default_rng(59)
    for _ in range(5):
        povm = random_povm(2, 2, rng)
        total = instrument_total(lueders_instrument(povm))
        assert check_pair(povm, total).compatible
        rep = robustness_pair_primal(povm, total)
        assert rep.primal_value < 1e-6
    for _ in range(5):
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        povm = projective_from_hermitian(h + h.conj().T)
        ch = unitary_channel(random_unitary(2, rng))
        assert not check_pair(povm, ch).compatible
        rep = robustness_pair_primal(povm, ch)
        assert rep.primal_value > 1e-4
        assert rep.gap < 1e-6 * (1 + rep.primal_value)


def test_pair_witness_normalization():
    w = robustness_pair_dual(basis_povm(2), identity_channel(2))
    rng = np.random.default_rng(61)
    worst = 0.0
    for _ in range(100):
        povm = random_povm(2, 2, rng)
        total = instrument_total(lueders_instrument(povm))
        worst = max(worst, w.evaluate(povm, total))
    assert worst <= 1 + 1e-7
    assert abs(w.evaluate(basis_povm(2), identity_channel(2)) - (1 + w.value)) < 1e-5


def test_prop1_agreement():
    res = verify_prop1(mub_pair(1.0))
    assert res["delta"] < 1e-6
    res = verify_prop1(PovmCollection([basis_povm(2), Povm([np.eye(2)])]))
    assert res["measurement_robustness"] < 1e-6
    assert res["delta"] < 1e-6
    rng = np.random.default_rng(67)
    res = verify_prop1(random_projective_pair(rng))
    assert res["delta"] < 1e-6


def test_prop2_agreement():
    res = verify_prop2(basis_povm(2), identity_channel(2))
    assert res["delta"] < 1e-6
    rng = np.random.default_rng(71)
    res = verify_prop2(random_povm(2, 2, rng), random_channel(2, 2, 2, rng))
    assert res["delta"] < 1e-6


def test_qc_channel_robustness_matches_measurement_value():
    # same number through two different programs
    coll = mub_pair(1.0)
    rm = robustness_measurements(coll).primal_value
    rc = robustness_channels_primal([qc_channel(p) for p in coll.povms]).primal_value
    assert abs(rm - rc) < 1e-6


def test_reports_are_deterministic():
    a = robustness_channels_primal([identity_channel(2), identity_channel(2)])
    b = robustness_channels_primal([identity_channel(2), identity_channel(2)])
    assert a.primal_value == b.primal_value
    assert a.dual_value == b.dual_value


def test_report_json_roundtrip_fields():
    rep = robustness_pair_primal(basis_povm(2), identity_channel(2))
    blob = rep.to_json()
    assert blob["kind"] == "pair"
    assert abs(blob["robustness"] - rep.primal_value) < 1e-15
    assert "witness" in blob and blob["witness"]["kind"] == "pair"
    assert blob["noise"] is not None and "povm" in blob["noise"]
    w = rep.witness.to_json()
    assert len(w["pair_measure_ops"]) == 2


def test_dimension_mismatch_rejected():
    from qincompat.linalg import ContractError
    with pytest.raises(ContractError):
        robustness_channels_primal([identity_channel(2), identity_channel(3)])
    with pytest.raises(ContractError):
        robustness_pair_primal(basis_povm(3), identity_channel(2))
