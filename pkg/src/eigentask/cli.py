"""eigentask command-line front end.

Subcommands: simulate, spectrum, rec, eigentasks, classify, twodesign, verify.
Every command is a pure function of its inputs and the seed; outputs are
CSV (with a version/config-hash comment line), JSON sidecars and JSONL
shot records.  Exit codes: 0 ok, 1 validation, 2 numerical, 3 I/O.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import numbers
import os
import sys

import numpy as np

from . import __version__, persist
from .acceptance import run_checks
from .analytic import two_design_rec, two_design_spectrum
from .learning import eigentask_sweep, make_reference_task
from .optical import OpticalEncoding, optical_map
from .quantum import (MAX_DENSE_QUBITS, CapabilityError, CircuitEncoding, HamiltonianEncoding,
                      chain_graph, circuit_map, haar_two_design_map, hamiltonian_map,
                      random_circuit_encoding, random_hamiltonian_encoding, ring_graph)
from .sampling import (MULTINOMIAL, POISSON, InputEnsemble, check_shots, is_infinite, make_ensemble,
                       sample_features)
from .spectral import (NumericalError, correct_finite_shots, eigentasks, estimate_moments,
                       exact_moments, gram_free_svd, k_cutoff, rec, solve_nsr)

SEED_ENV = "EIGENTASK_SEED"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
DEFAULT_SHOT_LIST = (1, 10, 100, 1000, 10_000, 100_000, 1_000_000)

GENERATORS = ("circuit", "hamiltonian", "haar", "optical")
ENSEMBLE_KINDS = ("iid-uniform", "equispaced-grid")


class ConfigError(ValueError):
    """Config failed validation; ``problems`` lists every bad field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n" + "\n".join(f"  - {p}" for p in self.problems))


# --------------------------------------------------------------------------
# config validation

def _is_int(v):
    return isinstance(v, numbers.Integral) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, numbers.Real) and not isinstance(v, bool) and math.isfinite(v)


def _check_int(d, key, errs, prefix, lo=None, hi=None, required=False):
    if key not in d:
        if required:
            errs.append(f"{prefix}{key}: required")
        return
    v = d[key]
    if not _is_int(v):
        errs.append(f"{prefix}{key}: expected an integer, got {v!r}")
    elif (lo is not None and v < lo) or (hi is not None and v > hi):
        rng = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
        errs.append(f"{prefix}{key}: {v} outside {rng}")


def _check_num(d, key, errs, prefix, lo=None, strict=False, required=False):
    if key not in d:
        if required:
            errs.append(f"{prefix}{key}: required")
        return
    v = d[key]
    if not _is_num(v):
        errs.append(f"{prefix}{key}: expected a finite number, got {v!r}")
    elif lo is not None and (v <= lo if strict else v < lo):
        errs.append(f"{prefix}{key}: must be {'>' if strict else '>='} {lo}, got {v}")


def _check_vector(d, key, L, errs, prefix):
    v = d[key]
    if not isinstance(v, list) or not all(_is_num(a) for a in v):
        errs.append(f"{prefix}{key}: expected a list of numbers")
    elif _is_int(L) and L >= 1 and len(v) != L:
        errs.append(f"{prefix}{key}: expected {L} entries, got {len(v)}")


def _check_shots_field(cfg, errs, required=True):
    if "shots" not in cfg:
        if required:
            errs.append("shots: required")
        return
    S = cfg["shots"]
    if S == "inf":
        return
    if not _is_int(S) or S < 1:
        errs.append(f"shots: expected a positive integer or \"inf\", got {S!r}")


def _validate_encoding(gen, enc, errs):
    p = "encoding."
    if not isinstance(enc, dict):
        errs.append("encoding: expected an object")
        return
    if gen == "circuit":
        _check_int(enc, "L", errs, p, 1, MAX_DENSE_QUBITS, required=True)
        _check_int(enc, "tau", errs, p, 1)
        _check_num(enc, "J", errs, p)
        _check_int(enc, "encoding_seed", errs, p, 0)
        given = [k for k in ("theta_x", "theta_z", "theta_i") if k in enc]
        if given and len(given) < 3:
            errs.append(f"{p}theta_x/theta_z/theta_i: give all three or none (random), got {given}")
        for k in given:
            _check_vector(enc, k, enc.get("L"), errs, p)
        _check_graph_field(enc, "graph", errs, p)
    elif gen == "hamiltonian":
        _check_int(enc, "L", errs, p, 1, MAX_DENSE_QUBITS, required=True)
        _check_num(enc, "t", errs, p, lo=0)
        _check_num(enc, "J", errs, p)
        _check_int(enc, "encoding_seed", errs, p, 0)
        given = [k for k in ("h_x", "h_z", "h_i") if k in enc]
        if given and len(given) < 3:
            errs.append(f"{p}h_x/h_z/h_i: give all three or none (random), got {given}")
        for k in given:
            _check_vector(enc, k, enc.get("L"), errs, p)
        if "couplings" in enc:
            c = enc["couplings"]
            if not isinstance(c, list) or not all(
                    isinstance(e, list) and len(e) == 3 and _is_int(e[0]) and _is_int(e[1])
                    and _is_num(e[2]) for e in c):
                errs.append(f"{p}couplings: expected a list of [a, b, J] triples")
        _check_graph_field(enc, "graph", errs, p)
    elif gen == "haar":
        _check_int(enc, "K", errs, p, 2, required=True)
        _check_int(enc, "encoding_seed", errs, p, 0)
    elif gen == "optical":
        _check_int(enc, "M", errs, p, 1)
        _check_int(enc, "P", errs, p, 1)
        _check_int(enc, "stride", errs, p, 1)
        for k in ("A1", "A2"):
            _check_num(enc, k, errs, p)
        _check_num(enc, "B", errs, p, lo=0)
        for k in ("brightness", "fourier_scale", "extent"):
            _check_num(enc, k, errs, p, lo=0, strict=True)
    known = {"circuit": {"L", "tau", "J", "theta_x", "theta_z", "theta_i", "graph", "encoding_seed"},
             "hamiltonian": {"L", "t", "J", "h_x", "h_z", "h_i", "couplings", "graph",
                             "encoding_seed"},
             "haar": {"K", "encoding_seed"},
             "optical": {"M", "P", "A1", "A2", "B", "fourier_scale", "brightness", "extent",
                         "stride"}}.get(gen, set())
    for k in sorted(set(enc) - known - {"type"}):
        errs.append(f"{p}{k}: unknown field for generator {gen!r}")


def _check_graph_field(enc, key, errs, p):
    if key not in enc:
        return
    g = enc[key]
    if not isinstance(g, list) or not all(
            isinstance(e, list) and len(e) == 2 and all(_is_int(a) for a in e) for e in g):
        errs.append(f"{p}{key}: expected a list of [a, b] index pairs")


def _validate_generator(cfg, errs):
    gen = cfg.get("generator")
    if gen is None:
        errs.append("generator: required")
    elif gen not in GENERATORS:
        errs.append(f"generator: expected one of {list(GENERATORS)}, got {gen!r}")
        gen = None
    if gen is not None:
        _validate_encoding(gen, cfg.get("encoding", {}), errs)
    return gen


def _validate_seed(cfg, errs):
    if "seed" in cfg and (not _is_int(cfg["seed"]) or cfg["seed"] < 0):
        errs.append(f"seed: expected a nonnegative integer, got {cfg['seed']!r}")


def validate_simulate_config(cfg) -> list:
    errs = []
    if not isinstance(cfg, dict):
        return ["config: expected a JSON object"]
    _validate_generator(cfg, errs)
    ens = cfg.get("ensemble")
    if not isinstance(ens, dict):
        errs.append("ensemble: required object {kind, N}")
    else:
        kind = ens.get("kind", "iid-uniform")
        if kind not in ENSEMBLE_KINDS:
            errs.append(f"ensemble.kind: expected one of {list(ENSEMBLE_KINDS)}, got {kind!r}")
        _check_int(ens, "N", errs, "ensemble.", 2 if kind == "equispaced-grid" else 1,
                   required=True)
    _check_shots_field(cfg, errs)
    _validate_seed(cfg, errs)
    for k in sorted(set(cfg) - {"generator", "encoding", "ensemble", "shots", "seed", "comment"}):
        errs.append(f"{k}: unknown field")
    return errs


def validate_classify_config(cfg) -> list:
    errs = []
    if not isinstance(cfg, dict):
        return ["config: expected a JSON object"]
    gen = _validate_generator(cfg, errs)
    if gen == "optical":
        errs.append("generator: classification uses multinomial generators (circuit, hamiltonian, haar)")
    _check_shots_field(cfg, errs)
    if cfg.get("shots") == "inf":
        errs.append("shots: the classification sweep needs a finite shot count")
    elif _is_int(cfg.get("shots")) and cfg["shots"] < 2:
        errs.append("shots: need S >= 2 for the finite-shot correction")
    _check_int(cfg, "permutations", errs, "", 1)
    _check_int(cfg, "spectrum_N", errs, "", 2)
    if cfg.get("K_max") is not None:
        _check_int(cfg, "K_max", errs, "", 1)
    task = cfg.get("task", {})
    if not isinstance(task, dict):
        errs.append("task: expected an object {n_train, n_test}")
    else:
        for k in ("n_train", "n_test"):
            _check_int(task, k, errs, "task.", 2)
            if _is_int(task.get(k)) and task[k] % 2:
                errs.append(f"task.{k}: must be even for balanced classes")
        for k in sorted(set(task) - {"n_train", "n_test"}):
            errs.append(f"task.{k}: unknown field")
    _validate_seed(cfg, errs)
    for k in sorted(set(cfg) - {"generator", "encoding", "shots", "permutations", "spectrum_N",
                                "K_max", "task", "seed", "comment"}):
        errs.append(f"{k}: unknown field")
    return errs


# --------------------------------------------------------------------------
# helpers

def resolve_seed(cli_seed, cfg=None) -> int:
    """CLI flag, then config, then environment, then 0."""
    if cli_seed is not None:
        return int(cli_seed)
    if cfg and "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            val = int(env)
        except ValueError:
            raise ConfigError([f"{SEED_ENV}: expected an integer, got {env!r}"]) from None
        if val < 0:
            raise ConfigError([f"{SEED_ENV}: must be nonnegative, got {val}"])
        return val
    return 0


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: not valid JSON ({exc})"]) from None


def build_map(cfg, seed):
    """Return (probability map, resolved encoding dict, noise model)."""
    gen = cfg["generator"]
    enc = dict(cfg.get("encoding", {}))
    enc_seed = enc.pop("encoding_seed", seed)
    if gen == "circuit":
        L = enc["L"]
        graph = tuple(map(tuple, enc["graph"])) if "graph" in enc else chain_graph(L)
        if "theta_x" in enc:
            e = CircuitEncoding(L, enc.get("tau", 3), enc["theta_x"], enc["theta_z"], enc["theta_i"],
                                enc.get("J", math.pi / 2), graph)
        else:
            e = random_circuit_encoding(L, enc_seed, tau=enc.get("tau", 3),
                                        J=enc.get("J", math.pi / 2), graph=graph)
        return circuit_map(e), e.to_dict(), MULTINOMIAL
    if gen == "hamiltonian":
        L = enc["L"]
        if "h_x" in enc:
            if "couplings" in enc:
                cpl = tuple(map(tuple, enc["couplings"]))
            else:
                graph = enc.get("graph", ring_graph(L))
                cpl = tuple((a, b, enc.get("J", 1.0)) for a, b in graph)
            e = HamiltonianEncoding(L, cpl, enc["h_x"], enc["h_z"], enc["h_i"], enc.get("t", 5.0))
        else:
            graph = tuple(map(tuple, enc["graph"])) if "graph" in enc else None
            e = random_hamiltonian_encoding(L, enc_seed, t=enc.get("t", 5.0), J=enc.get("J", 1.0),
                                            graph=graph)
        return hamiltonian_map(e), e.to_dict(), MULTINOMIAL
    if gen == "haar":
        return haar_two_design_map(enc["K"], enc_seed), \
            {"type": "haar", "K": enc["K"], "seed": enc_seed}, MULTINOMIAL
    e = OpticalEncoding.from_dict(enc)
    return optical_map(e), e.to_dict(), POISSON


def parse_shot_list(text):
    vals = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok == "inf":
            vals.append(math.inf)
            continue
        try:
            v = float(tok)
        except ValueError:
            raise ConfigError([f"shots: {tok!r} is not a number"]) from None
        if v != int(v) or v < 1:
            raise ConfigError([f"shots: {tok!r} is not a positive integer"])
        vals.append(int(v))
    if not vals:
        raise ConfigError(["shots: empty list"])
    return vals


def sorted_shots(vals):
    """Sorted unique shot list and whether the input order changed."""
    out = sorted(set(vals))
    return out, out != list(vals)


def file_digest(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()[:16]


def _note(msg):
    print(f"note: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# commands

def cmd_simulate(args):
    cfg = load_config(args.config)
    errs = validate_simulate_config(cfg)
    if errs:
        raise ConfigError(errs)
    seed = resolve_seed(args.seed, cfg)
    pmap, enc_dict, model = build_map(cfg, seed)
    ens = make_ensemble(cfg["ensemble"], seed)
    S = check_shots(cfg["shots"])
    resolved = {"generator": cfg["generator"], "encoding": enc_dict,
                "ensemble": cfg["ensemble"], "shots": persist.shots_json(S), "seed": seed}
    h = persist.config_hash(resolved)
    x = pmap.tabulate(ens)
    keep = not args.no_records and not is_infinite(S)
    fm, records = sample_features(x, ens, S, seed, model, keep_records=keep, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    persist.write_features(os.path.join(args.out, "features.csv"), fm, h,
                           extra={"generator": cfg["generator"], "encoding": enc_dict,
                                  "config_hash": h, "version": __version__})
    if records is not None:
        persist.write_records(os.path.join(args.out, "records.jsonl"), records)
    persist.write_json(os.path.join(args.out, "config.json"), resolved)
    print(f"wrote {fm.N} x {fm.K} features to {args.out}")
    return EXIT_OK


def cmd_spectrum(args):
    fm = persist.read_features(args.features)
    records = persist.read_records(args.records) if args.records else None
    shots_list, reordered = sorted_shots(parse_shot_list(args.shots_list))
    inputs = [args.features] + ([args.records] if args.records else [])
    h = persist.config_hash({"command": "spectrum", "inputs": file_digest(*inputs),
                             "correct_shots": args.correct_shots, "gram_free": args.gram_free,
                             "shots_list": [persist.shots_json(s) for s in shots_list]})
    if args.gram_free:
        spec = gram_free_svd(fm)
    elif fm.exact:
        spec = solve_nsr(exact_moments(fm.data, fm.ensemble.weights, fm.model))
    else:
        spec = solve_nsr(estimate_moments(fm, records, debias=False))
    notes = []
    if args.correct_shots:
        if fm.exact:
            notes.append("features are exact; no shot correction applied")
        else:
            spec = correct_finite_shots(spec, fm.shots)
    elif not fm.exact:
        notes.append(f"raw eigenvalues at S={fm.shots}; use --correct-shots for S=inf values")
    if reordered:
        notes.append("shot list sorted ascending")
    os.makedirs(args.out, exist_ok=True)
    persist.write_spectrum(os.path.join(args.out, "spectrum.csv"), spec, h)
    rows = ((persist.shots_json(S), k_cutoff(spec, S), rec(spec, S)) for S in shots_list)
    persist.write_csv(os.path.join(args.out, "kc.csv"), ["S", "K_c", "C_T"], rows, h, notes)
    for n in notes:
        _note(n)
    print(f"wrote spectrum with K={spec.K} ({spec.method}) to {args.out}")
    return EXIT_OK


def cmd_rec(args):
    spec = persist.read_spectrum(args.spectrum)
    shots, reordered = sorted_shots(parse_shot_list(args.shots))
    h = persist.config_hash({"command": "rec", "inputs": file_digest(args.spectrum),
                             "shots": [persist.shots_json(s) for s in shots]})
    notes = ["shot list sorted ascending"] if reordered else []
    rows = ((persist.shots_json(S), rec(spec, S), k_cutoff(spec, S)) for S in shots)
    os.makedirs(args.out, exist_ok=True)
    persist.write_csv(os.path.join(args.out, "rec.csv"), ["S", "C_T", "K_c"], rows, h, notes)
    for n in notes:
        _note(n)
    print(f"wrote {len(shots)} REC points to {args.out}")
    return EXIT_OK


def cmd_eigentasks(args):
    fm = persist.read_features(args.features)
    spec = persist.read_spectrum(args.spectrum)
    inputs = [args.features, args.spectrum] + ([args.exact] if args.exact else [])
    h = persist.config_hash({"command": "eigentasks", "inputs": file_digest(*inputs)})
    exact = persist.read_features(args.exact) if args.exact else (fm if fm.exact else None)
    measured = None if fm.exact else fm
    if exact is not None and exact.N != fm.N:
        raise ConfigError([f"--exact: {exact.N} rows but features have {fm.N}"])
    tab = eigentasks(exact, spec, measured=measured, ensemble=fm.ensemble)
    cols, blocks = ["u"], [fm.ensemble.values[:, None]]
    if tab.y is not None:
        cols += [f"y{k}" for k in range(spec.K)]
        blocks.append(tab.y)
    if tab.y_bar is not None:
        cols += [f"ybar{k}" for k in range(spec.K)]
        blocks.append(tab.y_bar)
    os.makedirs(args.out, exist_ok=True)
    persist.write_csv(os.path.join(args.out, "eigentasks.csv"), cols, np.hstack(blocks), h)
    print(f"wrote {spec.K} eigentasks on {fm.N} inputs to {args.out}")
    return EXIT_OK


def cmd_classify(args):
    cfg = load_config(args.config)
    errs = validate_classify_config(cfg)
    if errs:
        raise ConfigError(errs)
    seed = resolve_seed(args.seed, cfg)
    pmap, enc_dict, _ = build_map(cfg, seed)
    task_cfg = cfg.get("task", {})
    task = make_reference_task(seed, task_cfg.get("n_train", 150), task_cfg.get("n_test", 150))
    S = cfg["shots"]
    perms = cfg.get("permutations", 10)
    res = eigentask_sweep(pmap, task, S, perms, seed=seed,
                          spectrum_N=cfg.get("spectrum_N", 300), K_max=cfg.get("K_max"))
    resolved = {"generator": cfg["generator"], "encoding": enc_dict, "shots": S,
                "permutations": perms, "spectrum_N": cfg.get("spectrum_N", 300),
                "K_max": cfg.get("K_max"), "task": task.to_dict(), "seed": seed}
    h = persist.config_hash(resolved)
    rows = res.summary_rows()
    header = list(rows[0])
    os.makedirs(args.out, exist_ok=True)
    persist.write_csv(os.path.join(args.out, "classify.csv"), header,
                      ([r[c] for c in header] for r in rows), h,
                      [f"K_c = {res.K_c} from the shot-corrected spectrum at S={S}"])
    persist.write_spectrum(os.path.join(args.out, "spectrum.csv"), res.spectrum, h)
    persist.write_json(os.path.join(args.out, "config.json"), resolved)
    print(f"wrote {len(rows)}-row accuracy sweep (K_c = {res.K_c}) to {args.out}")
    return EXIT_OK


def cmd_twodesign(args):
    K = args.K
    if K < 2:
        raise ConfigError([f"--K: need K >= 2, got {K}"])
    shots, reordered = sorted_shots(parse_shot_list(args.shots))
    seed = resolve_seed(args.seed)
    spec = two_design_spectrum(K)
    cfg = {"command": "twodesign", "K": K, "shots": [persist.shots_json(s) for s in shots],
           "inputs": args.inputs, "seed": seed if args.inputs else None}
    h = persist.config_hash(cfg)
    mc = None
    if args.inputs:
        ens = InputEnsemble.iid_uniform(args.inputs, seed)
        mc = solve_nsr(exact_moments(haar_two_design_map(K, seed).tabulate(ens), ens.weights))
    os.makedirs(args.out, exist_ok=True)
    persist.write_spectrum(os.path.join(args.out, "spectrum.csv"), spec, h)
    header = ["S", "C_T_closed_form"] + (["C_T_monte_carlo"] if mc else [])
    rows = []
    for S in shots:
        row = [persist.shots_json(S), two_design_rec(K, S)]
        if mc:
            row.append(rec(mc, S))
        rows.append(row)
    notes = ["shot list sorted ascending"] if reordered else []
    persist.write_csv(os.path.join(args.out, "rec.csv"), header, rows, h, notes)
    if mc:
        persist.write_spectrum(os.path.join(args.out, "spectrum_monte_carlo.csv"), mc, h)
    print(f"wrote 2-design spectrum and REC for K={K} to {args.out}")
    return EXIT_OK


def cmd_verify(args):
    def show(res):
        print(res.to_json(), flush=True)
        print(res.line(), file=sys.stderr, flush=True)

    results = run_checks(quick=args.quick, golden=args.golden, stream=show)
    failed = [r for r in results if not r.passed]
    if args.report:
        persist.write_json(args.report, [json.loads(r.to_json()) for r in results])
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=sys.stderr)
    return EXIT_NUMERICAL if failed else EXIT_OK


# --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="eigentask", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"eigentask {__version__}")
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: config, then ${SEED_ENV}, then 0)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for shot sampling")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="sample shot records and features from a JSON config")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.add_argument("--no-records", action="store_true", help="skip the JSONL shot records")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("spectrum", help="NSR spectrum, eigenvectors and K_c table")
    s.add_argument("features")
    s.add_argument("--records", help="JSONL shot records (used for generic noise models)")
    s.add_argument("--correct-shots", action="store_true", help="map raw finite-S eigenvalues to S=inf")
    s.add_argument("--gram-free", action="store_true", help="use the SVD route")
    s.add_argument("--shots-list", default=",".join(map(str, DEFAULT_SHOT_LIST)))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("rec", help="REC curve C_T(S) from a spectrum file")
    s.add_argument("spectrum")
    s.add_argument("--shots", required=True, help="comma-separated shot counts, 'inf' allowed")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rec)

    s = sub.add_parser("eigentasks", help="tabulate eigentasks on the feature inputs")
    s.add_argument("features")
    s.add_argument("spectrum")
    s.add_argument("--exact", help="exact (S=inf) feature file on the same inputs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eigentasks)

    s = sub.add_parser("classify", help="accuracy sweep over the number of eigentasks")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("twodesign", help="closed-form 2-design spectrum and REC")
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--shots", default=",".join(map(str, DEFAULT_SHOT_LIST)))
    s.add_argument("--inputs", type=int, default=0, help="also run a Haar Monte Carlo with N inputs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_twodesign)

    s = sub.add_parser("verify", help="run the acceptance checks")
    s.add_argument("--quick", action="store_true", help="fast subset (under a minute)")
    s.add_argument("--golden", help="golden-value file (default: packaged copy)")
    s.add_argument("--report", help="also write the results as a JSON list")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, CapabilityError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
