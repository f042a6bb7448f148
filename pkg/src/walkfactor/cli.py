"""Command line interface.

Subcommands cover the full pipeline: simulate a walk from a chain, factorize
a walk (or pre-sampled transition pairs) into a spectral embedding, partition
states from a factorized checkpoint, run the boosted factorizer, ingest trip
records into transition pairs, and run the step-size diagnosis report.

Every command is seeded and writes a manifest.json with its resolved
parameters, so re-running a command with the same inputs reproduces its
output files byte for byte. States in files are 1-based; everything in
memory is 0-based. Errors come out as a single `error: ...` line on stderr
with exit code 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import boost as boost_mod
from . import chains, factorize, ingest, oracle, partition, reports, storage
from .rng import make_rng, trial_rng

FIXTURES = ("pex",)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (default 0)")
    common.add_argument("--out-dir", default=None,
                        help="output directory (default .)")
    common.add_argument("--config", default=None,
                        help="JSON file with default option values")

    parser = argparse.ArgumentParser(
        prog="walkfactor",
        description="stream a random walk into a spectral factorization "
                    "and a partition of the chain's states",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="simulate a random walk from a chain")
    p.add_argument("--fixture", choices=FIXTURES, default=None)
    p.add_argument("--chain", default=None, help="transition matrix CSV")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--start", type=int, default=None,
                   help="1-based start state (default 1)")

    for name in ("factorize", "boost"):
        p = sub.add_parser(name, parents=[common],
                           help="run the streaming factorizer"
                           if name == "factorize"
                           else "factorize with median-of-runs boosting")
        p.add_argument("--walk", default=None, help="walk file (1-based states)")
        p.add_argument("--pairs", default=None,
                       help="pre-sampled transition pairs CSV")
        p.add_argument("--m", type=int, default=None, help="number of states")
        p.add_argument("--fixture", choices=FIXTURES, default=None)
        p.add_argument("--rank", type=int, default=None)
        p.add_argument("--eta", type=float, default=None)
        p.add_argument("--eta-k0", type=float, default=None,
                       help="diminishing schedule constant k0")
        p.add_argument("--tau", type=int, default=None,
                       help="down-sampling block length")
        p.add_argument("--phi", type=float, default=None,
                       help="conductance used to derive tau when --tau is omitted")
        p.add_argument("--mu-max", type=float, default=None)
        p.add_argument("--mu-min", type=float, default=None)
        p.add_argument("--reorth", type=int, default=None,
                       help="re-orthonormalize every this many updates")
        if name == "factorize":
            p.add_argument("--reference", default=None,
                           help="reference basis CSV for the angle trace")
            p.add_argument("--trace-stride", type=int, default=None)
            p.add_argument("--diagnostics",
                           action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument("--k", type=int, default=None,
                           help="number of boosting segments")
            p.add_argument("--delta", type=float, default=None,
                           help="failure probability; sets k when --k is omitted")

    p = sub.add_parser("partition", parents=[common],
                       help="recover the block partition of the states")
    p.add_argument("--state", default=None,
                   help="factorizer checkpoint prefix")
    p.add_argument("--walk", default=None, help="walk file for visit counts")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--trials", type=int, default=None,
                   help="run the full pipeline this many times on the fixture")
    p.add_argument("--fixture", choices=FIXTURES, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--eta-k0", type=float, default=None)
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)

    p = sub.add_parser("ingest", parents=[common],
                       help="turn trip records into transition pairs")
    p.add_argument("--trips", default=None, help="trip CSV file")
    p.add_argument("--lat-min", type=float, default=None)
    p.add_argument("--lat-max", type=float, default=None)
    p.add_argument("--lon-min", type=float, default=None)
    p.add_argument("--lon-max", type=float, default=None)
    p.add_argument("--cell-m", type=float, default=None)
    p.add_argument("--min-visits", type=int, default=None)
    p.add_argument("--chain", action=argparse.BooleanOptionalAction,
                   default=None, help="chain consecutive trips into runs")

    p = sub.add_parser("diagnose", parents=[common],
                       help="measure convergence plateaus across step sizes")
    p.add_argument("--etas", default=None,
                   help="comma-separated step sizes")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None,
                   help="run length in units of eta * updates")
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--fixture", choices=FIXTURES, default=None)
    p.add_argument("--trace-points", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)

    return parser


DEFAULTS = {
    "simulate": {"fixture": None, "chain": None, "steps": None, "start": 1},
    "factorize": {"walk": None, "pairs": None, "m": None, "fixture": None,
                  "rank": 3, "eta": 0.01, "eta_k0": None, "tau": None,
                  "phi": None, "mu_max": None, "mu_min": None, "reorth": None,
                  "reference": None, "trace_stride": None, "diagnostics": False},
    "boost": {"walk": None, "pairs": None, "m": None, "fixture": None,
              "rank": 3, "eta": 0.01, "eta_k0": None, "tau": None,
              "phi": None, "mu_max": None, "mu_min": None, "reorth": None,
              "k": None, "delta": None},
    "partition": {"state": None, "walk": None, "restarts": 10, "trials": None,
                  "fixture": None, "steps": 10000, "rank": 3, "eta": 0.2,
                  "eta_k0": 1500.0, "tau": 2, "phi": None, "jobs": 1},
    "ingest": {"trips": None, "lat_min": None, "lat_max": None,
               "lon_min": None, "lon_max": None, "cell_m": 500.0,
               "min_visits": 100, "chain": True},
    "diagnose": {"etas": "0.02,0.01,0.005", "trials": 8, "horizon": 600.0,
                 "rank": 3, "fixture": "pex", "trace_points": 40, "jobs": 1},
}

COMMON_DEFAULTS = {"seed": 0, "out_dir": ".", "config": None}


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge explicit flags over config-file values over built-in defaults."""
    command = args.command
    config: dict = {}
    if args.config is not None:
        loaded = storage.load_json(args.config)
        section = loaded.get(command)
        config = section if isinstance(section, dict) else loaded
    opts: dict = {"command": command}
    merged = dict(COMMON_DEFAULTS)
    merged.update(DEFAULTS[command])
    for key, default in merged.items():
        given = getattr(args, key, None)
        if given is not None:
            opts[key] = given
        elif key in config:
            opts[key] = config[key]
        else:
            opts[key] = default
    return opts


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_manifest(out: Path, opts: dict, outputs: list,
                    extra: dict | None = None) -> None:
    payload = {
        "command": opts["command"],
        "parameters": _jsonable({k: v for k, v in opts.items()
                                 if k != "command"}),
        "outputs": sorted(outputs),
    }
    if extra:
        payload["results"] = _jsonable(extra)
    storage.save_json(out / "manifest.json", payload)


def _load_chain(opts: dict) -> chains.TransitionMatrix:
    if opts.get("fixture") == "pex":
        p, _, _, _ = chains.fixture_pex()
        return p
    if opts.get("chain"):
        return chains.TransitionMatrix(storage.load_matrix(opts["chain"]))
    raise ValueError("need --fixture or --chain to define the Markov chain")


def _resolve_tau(opts: dict) -> int:
    if opts["tau"] is not None:
        return int(opts["tau"])
    if opts["phi"] is None:
        raise ValueError("need --tau or --phi to down-sample a walk")
    mu_max, mu_min = opts["mu_max"], opts["mu_min"]
    if (mu_max is None or mu_min is None) and opts.get("fixture") == "pex":
        _, mu, _, _ = chains.fixture_pex()
        mu_max = float(mu.max()) if mu_max is None else mu_max
        mu_min = float(mu.min()) if mu_min is None else mu_min
    if mu_max is None or mu_min is None:
        raise ValueError("deriving tau from --phi needs --mu-max and --mu-min "
                         "(or a fixture that provides them)")
    return chains.block_length(opts["phi"], mu_max, mu_min, opts["eta"])


def _resolve_stream(opts: dict) -> tuple:
    """Returns (pairs, m, tau_used, walk_or_None) for factorize and boost."""
    if (opts["walk"] is None) == (opts["pairs"] is None):
        raise ValueError("need exactly one of --walk or --pairs")
    m = opts["m"]
    if m is None and opts.get("fixture") == "pex":
        m = 12
    if opts["pairs"] is not None:
        pairs = storage.load_pairs(opts["pairs"])
        if m is None:
            raise ValueError("--pairs needs --m (or a fixture) to fix the "
                             "state count")
        return pairs, int(m), None, None
    walk = storage.load_walk(opts["walk"])
    if m is None:
        if walk.size == 0:
            raise ValueError("empty walk and no --m given")
        m = int(walk.max()) + 1
    tau = _resolve_tau(opts)
    return factorize.downsample(walk, tau), int(m), tau, walk


def _eta_schedule(opts: dict) -> factorize.EtaSchedule:
    return factorize.EtaSchedule(opts["eta"], opts["eta_k0"])


def _fixture_reference(r: int) -> np.ndarray:
    p, _, _, _ = chains.fixture_pex()
    mu = chains.stationary_distribution(p)
    dp = np.diag(mu.mu) @ p.p
    return oracle.dilation_eigenbasis(dp, r)


def _save_embedding(out: Path, state: factorize.FactorizerState) -> list:
    emb = factorize.embedding(state)
    storage.save_state(out / "state", state)
    storage.save_matrix(out / "u_hat.csv", emb.u_hat)
    storage.save_matrix(out / "v_hat.csv", emb.v_hat)
    return ["state.json", "state_w.csv", "u_hat.csv", "v_hat.csv"]


def cmd_simulate(opts: dict, out: Path) -> None:
    if opts["steps"] is None:
        raise ValueError("--steps is required")
    p = _load_chain(opts)
    start = int(opts["start"]) - 1
    walk = chains.simulate_walk(p, start, int(opts["steps"]), opts["seed"])
    mu = chains.stationary_distribution(p)
    storage.save_walk(out / "walk.txt", walk)
    storage.save_matrix(out / "chain.csv", p.p)
    storage.save_vector(out / "mu.csv", mu.mu)
    _write_manifest(out, opts, ["walk.txt", "chain.csv", "mu.csv",
                                "manifest.json"])
    print(f"walk.txt: {walk.size} steps over {p.m} states "
          f"from state {start + 1}")


def cmd_factorize(opts: dict, out: Path) -> None:
    pairs, m, tau, _ = _resolve_stream(opts)
    if tau is not None:
        print(f"tau={tau}")
    state = factorize.init_state(m, int(opts["rank"]), opts["seed"],
                                 _eta_schedule(opts))
    reference = None
    if opts["reference"] is not None:
        reference = storage.load_matrix(opts["reference"])
    elif opts["trace_stride"] is not None and opts.get("fixture") == "pex":
        reference = _fixture_reference(int(opts["rank"]))
    if opts["trace_stride"] is not None and reference is None:
        raise ValueError("tracing needs --reference or a fixture")
    final, trace = factorize.run(
        pairs, state,
        reference=reference,
        trace_stride=opts["trace_stride"],
        reorth_period=opts["reorth"],
        diagnostics=bool(opts["diagnostics"]),
    )
    outputs = _save_embedding(out, final) + ["manifest.json"]
    results = {"updates": final.k, "blocks": int(pairs.shape[0])}
    if tau is not None:
        results["tau"] = tau
    if trace is not None:
        storage.save_trace(out / "trace.csv", trace)
        reports.save_trace_figure(out / "trace.png", [trace])
        outputs += ["trace.csv", "trace.png"]
        results["final_sin2"] = float(trace.values[-1])
        print(f"final_sin2={trace.values[-1]:.6g}")
    _write_manifest(out, opts, outputs, results)
    print(f"factorized {pairs.shape[0]} block samples over {m} states "
          f"(rank {final.r})")


def cmd_boost(opts: dict, out: Path) -> None:
    pairs, m, tau, _ = _resolve_stream(opts)
    if tau is not None:
        print(f"tau={tau}")
    k = opts["k"]
    if k is None:
        k = boost_mod.boost_count(opts["delta"]) if opts["delta"] is not None else 1
    _, report = boost_mod.boosted_factorize(
        pairs, m, int(opts["rank"]), _eta_schedule(opts), int(k),
        opts["seed"], reorth_period=opts["reorth"],
    )
    outputs = _save_embedding(out, report.state)
    storage.save_json(out / "boost.json", {
        "k": report.k,
        "segment_length": report.segment_length,
        "chosen": report.chosen,
        "distances": _jsonable(report.distances),
    })
    reports.save_boost_figure(out / "boost.png", report.distances,
                              report.chosen)
    outputs += ["boost.json", "boost.png", "manifest.json"]
    _write_manifest(out, opts, outputs, {
        "chosen": report.chosen, "k": report.k,
        "segment_length": report.segment_length,
    })
    print(f"boost: kept trial {report.chosen + 1} of {report.k} "
          f"(segments of {report.segment_length} samples)")


def _reference_partition(p: chains.TransitionMatrix, r: int, seed) -> partition.Partition:
    mu = chains.stationary_distribution(p)
    dp = np.diag(mu.mu) @ p.p
    fact = oracle.batch_factorize(dp, r)
    emb = factorize.Embedding(u_hat=fact.u, v_hat=fact.v)
    rep = partition.representation(emb, mu.mu)
    return partition.partition_states(rep, r, seed)


def _partition_trial(payload: tuple) -> dict:
    (p_arr, seed, trial, steps, r, eta0, eta_k0, tau, restarts,
     ref_labels) = payload
    p = chains.TransitionMatrix(p_arr)
    m = p.m
    rng = trial_rng(seed, trial)
    s0 = int(rng.integers(m))
    walk = chains.simulate_walk(p, s0, steps, rng)
    pairs = factorize.downsample(walk, tau)
    state = factorize.init_state(m, r, rng, factorize.EtaSchedule(eta0, eta_k0))
    final, _ = factorize.run(pairs, state)
    emb = factorize.embedding(final)
    mu_hat = partition.empirical_stationary(walk, m)
    rep = partition.representation(emb, mu_hat)
    part = partition.partition_states(rep, r, rng, restarts=restarts)
    reference = partition.Partition(np.asarray(ref_labels), r)
    agreement = partition.partition_agreement(part, reference)
    return {"trial": trial, "agreement": agreement,
            "exact": bool(agreement == 1.0)}


def cmd_partition(opts: dict, out: Path) -> None:
    if opts["trials"] is not None:
        _cmd_partition_trials(opts, out)
        return
    if opts["state"] is None or opts["walk"] is None:
        raise ValueError("partition needs --state and --walk "
                         "(or --trials for pipeline mode)")
    state = storage.load_state(opts["state"])
    walk = storage.load_walk(opts["walk"])
    emb = factorize.embedding(state)
    mu_hat = partition.empirical_stationary(walk, state.m)
    rep = partition.representation(emb, mu_hat)
    part = partition.partition_states(rep, state.r, opts["seed"],
                                      restarts=int(opts["restarts"]))
    storage.save_labels(out / "labels.csv", part.labels)
    sizes = [int((part.labels == c).sum()) for c in range(part.r)]
    storage.save_json(out / "partition.json",
                      {"r": part.r, "sizes": sizes})
    _write_manifest(out, opts, ["labels.csv", "partition.json",
                                "manifest.json"], {"sizes": sizes})
    print(f"partition: {part.r} blocks with sizes {sizes}")


def _cmd_partition_trials(opts: dict, out: Path) -> None:
    if opts.get("fixture") != "pex":
        raise ValueError("pipeline mode needs --fixture pex")
    p, _, _, _ = chains.fixture_pex()
    r = int(opts["rank"])
    tau = int(opts["tau"]) if opts["tau"] is not None else _resolve_tau(opts)
    reference = _reference_partition(p, r, opts["seed"])
    trials = int(opts["trials"])
    payloads = [
        (p.p, opts["seed"], t, int(opts["steps"]), r, float(opts["eta"]),
         opts["eta_k0"], tau, int(opts["restarts"]), reference.labels)
        for t in range(trials)
    ]
    jobs = int(opts["jobs"])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_partition_trial, payloads))
    else:
        rows = [_partition_trial(pl) for pl in payloads]
    rows.sort(key=lambda row: row["trial"])
    agreements = np.array([row["agreement"] for row in rows])
    summary = {
        "trials": trials,
        "steps": int(opts["steps"]),
        "tau": tau,
        "exact_recoveries": int(sum(row["exact"] for row in rows)),
        "mean_agreement": float(agreements.mean()),
        "min_agreement": float(agreements.min()),
        "per_trial": rows,
    }
    storage.save_json(out / "recovery.json", summary)
    _write_manifest(out, opts, ["recovery.json", "manifest.json"],
                    {k: v for k, v in summary.items() if k != "per_trial"})
    print(f"recovery: {summary['exact_recoveries']}/{trials} exact, "
          f"mean agreement {summary['mean_agreement']:.4f}")


def cmd_ingest(opts: dict, out: Path) -> None:
    if opts["trips"] is None:
        raise ValueError("--trips is required")
    for key in ("lat_min", "lat_max", "lon_min", "lon_max"):
        if opts[key] is None:
            raise ValueError(f"--{key.replace('_', '-')} is required")
    spec = ingest.GridSpec(opts["lat_min"], opts["lat_max"],
                           opts["lon_min"], opts["lon_max"],
                           opts["cell_m"])
    trips = ingest.load_trips(opts["trips"])
    result = ingest.build_stream(trips, spec,
                                 min_visits=int(opts["min_visits"]),
                                 chain=bool(opts["chain"]))
    storage.save_pairs(out / "pairs.csv", result.pairs)
    with open(out / "cells.csv", "w") as fh:
        fh.write("state,cell\n")
        for s, cell in enumerate(result.cell_ids):
            fh.write(f"{s + 1},{int(cell)}\n")
    storage.save_json(out / "ingest.json", result.report)
    _write_manifest(out, opts, ["pairs.csv", "cells.csv", "ingest.json",
                                "manifest.json"], result.report)
    rep = result.report
    print(f"ingest: kept {rep['trips_kept']}/{rep['trips_read']} trips over "
          f"{rep['states']} cells in {rep['runs']} runs")


def _diagnose_trial(payload: tuple) -> dict:
    p_arr, seed, trial, eta, horizon, r, trace_points = payload
    p = chains.TransitionMatrix(p_arr)
    m = p.m
    n_blocks = max(int(round(horizon / eta)), 8)
    rng = trial_rng(seed, trial)
    s0 = int(rng.integers(m))
    mu = chains.stationary_distribution(p)
    dp = np.diag(mu.mu) @ p.p
    reference = oracle.dilation_eigenbasis(dp, r)
    walk = chains.simulate_walk(p, s0, 2 * n_blocks, rng)
    pairs = factorize.downsample(walk, 2)
    state = factorize.init_state(m, r, rng, eta)
    stride = max(n_blocks // trace_points, 1)
    _, trace = factorize.run(pairs, state, reference=reference,
                             trace_stride=stride)
    tail = trace.values[3 * trace.values.size // 4 :]
    plateau = float(np.exp(np.log(np.maximum(tail, 1e-300)).mean()))
    return {"trial": trial, "eta": eta, "plateau": plateau}


def cmd_diagnose(opts: dict, out: Path) -> None:
    if opts.get("fixture") != "pex":
        raise ValueError("diagnose currently supports --fixture pex only")
    p, _, _, _ = chains.fixture_pex()
    etas = [float(tok) for tok in str(opts["etas"]).split(",") if tok]
    if not etas:
        raise ValueError("--etas must name at least one step size")
    trials = int(opts["trials"])
    r = int(opts["rank"])
    payloads = [
        (p.p, opts["seed"], t, eta, float(opts["horizon"]), r,
         int(opts["trace_points"]))
        for eta in etas for t in range(trials)
    ]
    jobs = int(opts["jobs"])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_diagnose_trial, payloads))
    else:
        rows = [_diagnose_trial(pl) for pl in payloads]
    plateaus = []
    for eta in etas:
        vals = np.array([row["plateau"] for row in rows
                         if row["eta"] == eta])
        plateaus.append(float(np.exp(np.log(vals).mean())))
    with open(out / "diagnose.csv", "w") as fh:
        fh.write("eta,plateau,trials\n")
        for eta, plateau in zip(etas, plateaus):
            fh.write(("%.17g,%.17g,%d\n") % (eta, plateau, trials))
    reports.save_plateau_figure(out / "diagnose.png", etas, plateaus)
    _write_manifest(out, opts, ["diagnose.csv", "diagnose.png",
                                "manifest.json"],
                    {"etas": etas, "plateaus": plateaus})
    for eta, plateau in zip(etas, plateaus):
        print(f"eta={eta:g} plateau={plateau:.6g} "
              f"(ratio {plateau / eta:.3f})")


HANDLERS = {
    "simulate": cmd_simulate,
    "factorize": cmd_factorize,
    "boost": cmd_boost,
    "partition": cmd_partition,
    "ingest": cmd_ingest,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
        out = Path(opts["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](opts, out)
        return 0
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
