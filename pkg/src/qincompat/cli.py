"""Command line front end.

Four subcommands, all emitting one JSON report:

* ``robustness {channels|measurements|pair} --input FILE`` computes the
  incompatibility robustness of the objects in FILE along with the dual
  witness, the optimal noise and the certifying compatible mixture.
* ``compat {channels|measurements|pair} --input FILE`` runs the plain
  feasibility check and returns the verdict with margin and joint object.
* ``verify {theorem1|theorem2|prop1|prop2|appendixC|duality}`` replays one
  of the self-check suites on seeded instances and reports every assertion
  with its value and tolerance.
* ``demo {identity-pair|bb84|cloning}`` runs a small worked example.

Reports go to stdout unless ``--out FILE`` is given; the file is written
only after the computation finished, so a failing run leaves no partial
output.  With a fixed seed the report is reproducible byte for byte except
for the ``timestamp`` field.

Exit codes: 0 success, 1 bad input or arguments, 2 solver failure,
3 a verification check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .compat import check_channels, check_measurements, check_pair
from .games import (
    DiscriminationGame,
    Strategy,
    advantage_ratio,
    best_compatible_success,
    game_from_channel_witness,
    game_from_pair_witness,
    success_prob,
    unassisted_bound_check,
)
from .linalg import ContractError
from .qobjects import (
    ChoiMatrix,
    Povm,
    PovmCollection,
    basis_povm,
    cloning_channel,
    depolarizing_channel,
    identity_channel,
    marginal,
    projective_from_hermitian,
    random_channel,
    random_povm,
    random_state,
    random_unitary,
    unitary_channel,
)
from .robustness import (
    identity_pair_closed_form,
    robustness_channels_primal,
    robustness_measurements,
    robustness_pair_primal,
    verify_prop1,
    verify_prop2,
)
from .sdp import DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, SolveOptions, SolverFailure


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qincompat",
        description="robustness of quantum incompatibility and its discrimination games",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, input_file=False):
        if input_file:
            sp.add_argument("--input", required=True, help="path to a JSON input file")
        sp.add_argument("--dim", type=int, default=2, help="Hilbert space dimension")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed for sampled instances")
        sp.add_argument("--trials", type=int, default=None, help="number of sampled instances")
        sp.add_argument("--tol-gap", type=float, default=DEFAULT_GAP_TOL,
                        help="solver duality gap tolerance")
        sp.add_argument("--tol-feas", type=float, default=DEFAULT_FEAS_TOL,
                        help="solver feasibility tolerance")
        sp.add_argument("--out", default=None, help="write the JSON report here instead of stdout")

    rb = sub.add_parser("robustness", help="compute incompatibility robustness with witness")
    rb.add_argument("target", choices=["channels", "measurements", "pair"])
    common(rb, input_file=True)

    cp = sub.add_parser("compat", help="feasibility check for compatibility")
    cp.add_argument("target", choices=["channels", "measurements", "pair"])
    common(cp, input_file=True)

    vf = sub.add_parser("verify", help="run a seeded self-check suite")
    vf.add_argument("suite", choices=["theorem1", "theorem2", "prop1", "prop2",
                                      "appendixC", "duality"])
    common(vf)

    dm = sub.add_parser("demo", help="run a worked example")
    dm.add_argument("name", choices=["identity-pair", "bb84", "cloning"])
    common(dm)
    return p


# ---------------------------------------------------------------- inputs

def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ContractError(f"cannot read input file: {e}")
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ContractError("input must be a JSON object")
    return obj


def _load_channels(obj) -> list:
    if "channels" not in obj or not isinstance(obj["channels"], list):
        raise ContractError('channel input needs a "channels" list')
    return [ChoiMatrix.from_json(c) for c in obj["channels"]]


def _load_collection(obj) -> PovmCollection:
    return PovmCollection.from_json(obj).validate()


def _load_pair(obj):
    if "povm" not in obj or "channel" not in obj:
        raise ContractError('pair input needs "povm" and "channel" entries')
    return Povm.from_json(obj["povm"]), ChoiMatrix.from_json(obj["channel"])


# --------------------------------------------------------------- checks

def _record(checks, name, value, target, tol, mode="abs"):
    """Append one assertion record; mode is abs, upper or lower."""
    value = float(value)
    target = float(target)
    if mode == "abs":
        ok = abs(value - target) <= tol
        rule = "|value - target| <= tolerance"
    elif mode == "upper":
        ok = value <= target + tol
        rule = "value <= target + tolerance"
    else:
        ok = value >= target - tol
        rule = "value >= target - tolerance"
    checks.append({"name": name, "value": value, "target": target,
                   "tolerance": float(tol), "rule": rule, "pass": bool(ok)})
    return ok


# ------------------------------------------------------------- commands

def _cmd_robustness(args, opts):
    obj = _load_json(args.input)
    if args.target == "channels":
        rep = robustness_channels_primal(_load_channels(obj), opts)
    elif args.target == "measurements":
        rep = robustness_measurements(_load_collection(obj), opts)
    else:
        povm, channel = _load_pair(obj)
        rep = robustness_pair_primal(povm, channel, opts)
    payload = rep.to_json()
    payload["input"] = args.input
    return payload, 0


def _cmd_compat(args, opts):
    obj = _load_json(args.input)
    if args.target == "channels":
        verdict = check_channels(_load_channels(obj), opts)
    elif args.target == "measurements":
        verdict = check_measurements(_load_collection(obj), opts)
    else:
        povm, channel = _load_pair(obj)
        verdict = check_pair(povm, channel, opts)
    payload = verdict.to_json()
    payload["target"] = args.target
    payload["input"] = args.input
    return payload, 0


def _noisy_unitary(d, visibility, rng) -> ChoiMatrix:
    """Random unitary channel mixed with the completely depolarizing one."""
    ju = unitary_channel(random_unitary(d, rng)).matrix
    white = np.eye(d * d, dtype=complex) / (d * d)
    return ChoiMatrix(d, d, visibility * ju + (1 - visibility) * white)


def _suite_theorem1(dim, seed, trials, opts, checks):
    """Channel game built from the witness realizes 1 + robustness."""
    ids = [identity_channel(dim), identity_channel(dim)]
    rep = robustness_channels_primal(ids, opts)
    _record(checks, "identity_pair_closed_form", rep.primal_value,
            identity_pair_closed_form(dim), 1e-6)
    game, meas = game_from_channel_witness(rep.witness, dim, dim)
    ratio = advantage_ratio(game, meas, Strategy(preprocess=ids, measurements=meas),
                            "channels", opts)
    _record(checks, "identity_pair_game_ratio", ratio, 1 + rep.primal_value, 1e-5)
    rng = np.random.default_rng(seed)
    for k in range(trials):
        # noisy unitaries: unitary pairs all share one robustness value, so
        # vary the visibility to get distinct instances
        pair = [_noisy_unitary(2, 0.8 + 0.15 * rng.random(), rng) for _ in range(2)]
        rep = robustness_channels_primal(pair, opts)
        _record(checks, f"random_pair_{k}_incompatible", rep.primal_value, 1e-3,
                0.0, mode="lower")
        game, meas = game_from_channel_witness(rep.witness, 2, 2)
        ratio = advantage_ratio(game, meas, Strategy(preprocess=pair, measurements=meas),
                                "channels", opts)
        _record(checks, f"random_pair_{k}_game_ratio", ratio, 1 + rep.primal_value, 1e-5)


def _suite_theorem2(dim, seed, trials, opts, checks):
    """Pair game built from the witness realizes 1 + robustness."""
    cases = [(basis_povm(2), identity_channel(2))]
    rng = np.random.default_rng(seed)
    while len(cases) < trials:
        # smeared projectives against noisy unitaries give a spread of
        # robustness values; exact projective-unitary pairs all coincide
        proj = projective_from_hermitian(random_state(2, rng))
        vm = 0.85 + 0.1 * rng.random()
        povm = Povm([vm * e + (1 - vm) * np.eye(2) / 2 for e in proj.elements])
        cases.append((povm, _noisy_unitary(2, 0.85 + 0.1 * rng.random(), rng)))
    for k, (povm, channel) in enumerate(cases):
        rep = robustness_pair_primal(povm, channel, opts)
        _record(checks, f"pair_{k}_incompatible", rep.primal_value, 1e-3,
                0.0, mode="lower")
        game, template = game_from_pair_witness(rep.witness, 2, 2)
        final = template.pair_mode[2]
        ratio = advantage_ratio(game, PovmCollection([final]),
                                template.with_pair(povm, channel), "pair", opts)
        _record(checks, f"pair_{k}_game_ratio", ratio, 1 + rep.primal_value, 1e-5)


def _suite_prop1(dim, seed, trials, opts, checks):
    """Measurement robustness equals the measure-and-record channel robustness."""
    sz = np.diag([1.0, -1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    cases = [PovmCollection([projective_from_hermitian(sz), projective_from_hermitian(sx)])]
    rng = np.random.default_rng(seed)
    while len(cases) < trials + 1:
        cases.append(PovmCollection([random_povm(2, 2, rng) for _ in range(2)]))
    worst = 0.0
    for k, coll in enumerate(cases):
        out = verify_prop1(coll, opts)
        _record(checks, f"collection_{k}_delta", out["delta"], 0.0, 1e-6)
        worst = max(worst, out["delta"])
    _record(checks, "max_delta", worst, 0.0, 1e-6)


def _suite_prop2(dim, seed, trials, opts, checks):
    """Pair robustness equals the two-channel robustness of its embedding."""
    cases = [(basis_povm(2), identity_channel(2))]
    rng = np.random.default_rng(seed)
    while len(cases) < trials + 1:
        cases.append((random_povm(2, 2, rng), random_channel(2, 2, 2, rng)))
    worst = 0.0
    for k, (povm, channel) in enumerate(cases):
        out = verify_prop2(povm, channel, opts)
        _record(checks, f"pair_{k}_delta", out["delta"], 0.0, 1e-6)
        worst = max(worst, out["delta"])
    _record(checks, "max_delta", worst, 0.0, 1e-6)


def _suite_appendix_c(dim, seed, trials, opts, checks):
    """Cloning marginals are depolarizing and unassisted games obey the bound."""
    c = (dim + 2) / (2 * (dim + 1))
    clone = cloning_channel(dim)
    dep = depolarizing_channel(dim, c)
    dev = max(np.abs(marginal(clone, x).matrix - dep.matrix).max() for x in (1, 2))
    _record(checks, "cloning_marginal_deviation", dev, 0.0, 1e-9)
    out = unassisted_bound_check(dim, trials, seed, opts)
    _record(checks, "max_unassisted_ratio", out["max_ratio"], out["bound"], 1e-6,
            mode="upper")
    _record(checks, "gap_to_assisted_value", out["gap"], 0.0, 0.0, mode="lower")
    return out


def _suite_duality(dim, seed, trials, opts, checks):
    """Primal and dual robustness values agree to relative tolerance."""
    def gap_check(name, rep):
        rel = abs(rep.primal_value - rep.dual_value) / (1 + rep.primal_value)
        _record(checks, name, rel, 0.0, 1e-6)

    for d in (2, 3):
        gap_check(f"identity_pair_dim{d}", robustness_channels_primal(
            [identity_channel(d), identity_channel(d)], opts))
    rng = np.random.default_rng(seed)
    for k in range(trials):
        if k % 2 == 0:
            pair = [unitary_channel(random_unitary(2, rng)) for _ in range(2)]
        else:
            pair = [random_channel(2, 2, 2, rng) for _ in range(2)]
        gap_check(f"random_pair_{k}", robustness_channels_primal(pair, opts))


_SUITES = {
    "theorem1": (_suite_theorem1, {"seed": 7, "trials": 5}),
    "theorem2": (_suite_theorem2, {"seed": 11, "trials": 3}),
    "prop1": (_suite_prop1, {"seed": 7, "trials": 20}),
    "prop2": (_suite_prop2, {"seed": 13, "trials": 10}),
    "appendixC": (_suite_appendix_c, {"seed": 0, "trials": 200}),
    "duality": (_suite_duality, {"seed": 3, "trials": 10}),
}


def _cmd_verify(args, opts):
    fn, defaults = _SUITES[args.suite]
    seed = defaults["seed"] if args.seed is None else args.seed
    trials = defaults["trials"] if args.trials is None else args.trials
    checks = []
    extra = fn(args.dim, seed, trials, opts, checks)
    passed = all(c["pass"] for c in checks)
    payload = {
        "suite": args.suite,
        "dim": args.dim,
        "seed": seed,
        "trials": trials,
        "checks": checks,
        "passed": passed,
    }
    if extra is not None:
        payload["detail"] = extra
    return payload, 0 if passed else 3


def _demo_identity_pair(dim, opts):
    ids = [identity_channel(dim), identity_channel(dim)]
    rep = robustness_channels_primal(ids, opts)
    game, meas = game_from_channel_witness(rep.witness, dim, dim)
    ratio = advantage_ratio(game, meas, Strategy(preprocess=ids, measurements=meas),
                            "channels", opts)
    return {
        "dim": dim,
        "robustness": rep.primal_value,
        "closed_form": identity_pair_closed_form(dim),
        "one_plus_robustness": 1 + rep.primal_value,
        "game_ratio": ratio,
    }


def _demo_bb84(dim, opts):
    # two conjugate bases; reading out the flagged basis identifies the state
    z0 = np.diag([1.0, 0.0]).astype(complex)
    z1 = np.diag([0.0, 1.0]).astype(complex)
    plus = np.full((2, 2), 0.5, dtype=complex)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)
    game = DiscriminationGame(
        prior=[0.5, 0.5],
        ensembles=[[(0.5, z0), (0.5, z1)], [(0.5, plus), (0.5, minus)]],
    ).validate()
    meas = PovmCollection([basis_povm(2), Povm([plus, minus])])
    guessing = Povm([np.eye(2, dtype=complex) / 2] * 2)
    succ = success_prob(game, Strategy(measurements=meas))
    den = best_compatible_success(game, meas, "channels", opts)
    return {
        "success": succ,
        "success_random_guess": success_prob(
            game, Strategy(measurements=PovmCollection([guessing, guessing]))),
        "best_compatible": den,
        "advantage_ratio": succ / den,
    }


def _demo_cloning(dim, opts):
    c = (dim + 2) / (2 * (dim + 1))
    clone = cloning_channel(dim)
    dep = depolarizing_channel(dim, c)
    margs = [marginal(clone, 1), marginal(clone, 2)]
    dev = max(np.abs(m.matrix - dep.matrix).max() for m in margs)
    verdict = check_channels(margs, opts)
    return {
        "dim": dim,
        "depolarizing_visibility": c,
        "marginal_deviation": dev,
        "marginals_compatible": verdict.compatible,
        "compat_margin": verdict.margin,
    }


def _cmd_demo(args, opts):
    fns = {"identity-pair": _demo_identity_pair, "bb84": _demo_bb84,
           "cloning": _demo_cloning}
    payload = fns[args.name](args.dim, opts)
    payload["name"] = args.name
    return payload, 0


# ----------------------------------------------------------------- main

def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _run(args) -> tuple[dict, int]:
    opts = SolveOptions(feas_tol=args.tol_feas, gap_tol=args.tol_gap)
    dispatch = {"robustness": _cmd_robustness, "compat": _cmd_compat,
                "verify": _cmd_verify, "demo": _cmd_demo}
    payload, code = dispatch[args.command](args, opts)
    payload["command"] = args.command
    payload["solver_options"] = {"feas_tol": opts.feas_tol, "gap_tol": opts.gap_tol,
                                 "max_iter": opts.max_iter}
    payload["timestamp"] = datetime.now(timezone.utc).isoformat()
    return payload, code


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help and 2 for usage errors; fold the
        # latter into the invalid-input code
        return 0 if not e.code else 1
    try:
        payload, code = _run(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SolverFailure as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return 2
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
