"""Monte Carlo driver: end-to-end trials, aggregation, JSON reports and CLI."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .adversary import SessionSetup, Strategy, apply_strategy, parse_adversary
from .bcast import BroadcastParams, run_broadcast
from .dist import ConfigError, DistParams, GlobalStatus, run_distribution
from .netsim import Network
from .players import HOME_SLOT, PLAYERS, Player, format_value
from .sources import QUANTUM_PATHS

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2
ABORT = "abort"


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    trials: int = 1000
    master_seed: int = 0
    sender_input: object = "random"
    adversary: str = "HonestAll"
    quantum_path: str = "oracle"
    bcast: BroadcastParams = field(default_factory=BroadcastParams)
    dist: DistParams = field(default_factory=DistParams)
    report: Optional[str] = None
    transcripts: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.sender_input not in (0, 1, "random"):
            raise ConfigError("sender_input must be 0, 1 or 'random'")
        if self.quantum_path not in QUANTUM_PATHS:
            raise ConfigError(f"quantum_path must be one of {sorted(QUANTUM_PATHS)}")
        if self.dist.payload < self.bcast.m:
            raise ConfigError(
                f"payload block of {self.dist.payload} is smaller than m={self.bcast.m}"
            )
        if self.dist.payload < 6 * self.bcast.j_min:
            raise ConfigError("payload must hold at least 6 * j_min triplets")
        try:
            self.strategy()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def for_triplets(cls, m: int, **kw) -> "RunConfig":
        return cls(bcast=BroadcastParams.for_size(m), dist=DistParams(payload=m), **kw)

    def strategy(self) -> Strategy:
        return parse_adversary(self.adversary)

    def to_json(self) -> dict:
        d = asdict(self)
        d["dist"]["n_total"] = self.dist.n_total
        return d

    @classmethod
    def from_json(cls, data: dict, base: Optional["RunConfig"] = None) -> "RunConfig":
        base = base or cls()
        data = dict(data)
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "bcast" in data:
                b = dict(data["bcast"])
                if "m" in b and set(b) <= {"m"}:
                    data["bcast"] = BroadcastParams.for_size(b["m"])
                else:
                    data["bcast"] = replace(base.bcast, **b)
            if "dist" in data:
                d = dict(data["dist"])
                n_total = d.pop("n_total", None)
                dist = replace(base.dist, **d)
                if n_total is not None:
                    dist = replace(dist, payload=n_total - dist.consumed - dist.slack)
                data["dist"] = dist
            return replace(base, **data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def trial_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def trial_rngs(master_seed: int, index: int) -> dict:
    kids = trial_seed(master_seed, index).spawn(6)
    keys = ["public", "quantum", Player.S, Player.R0, Player.R1, "input"]
    return {k: np.random.default_rng(s) for k, s in zip(keys, kids)}


def _outcome(v):
    return ABORT if v == ABORT else format_value(v)


def run_trial(config: RunConfig, index: int, strategy: Optional[Strategy] = None):
    """One distribution + payload session. Returns ``(trial_report, transcript)``."""
    strategy = strategy or config.strategy()
    rngs = trial_rngs(config.master_seed, index)
    x = config.sender_input
    if x == "random":
        x = int(rngs["input"].integers(2))
    setup = apply_strategy(SessionSetup.honest(), strategy)
    honest = [p for p in PLAYERS if p != setup.corrupted]
    net = Network(rushing=setup.rushing)

    dist = run_distribution(setup.behaviors, config.dist, rngs, config.quantum_path, net)
    honest_status = {dist.status[p] for p in honest}
    status_consistent = len(honest_status) == 1
    payload = None
    outcomes = {}
    if honest_status == {GlobalStatus.SUCCESS}:
        block = dist.layout["payload"][: config.bcast.m]
        results = {}
        for p in PLAYERS:
            results[p] = dist.source.measure_z(p, block, HOME_SLOT[p])
            net.transcript.record_measurement(p, "payload", results[p])
        payload = run_broadcast(
            net, results, x, config.bcast,
            behaviors=setup.behaviors, rngs={p: rngs[p] for p in PLAYERS},
        )
        outcomes = dict(payload.outputs)
    else:
        outcomes = {
            p: ABORT if dist.status[p] == GlobalStatus.FAILURE else "undecided" for p in PLAYERS
        }

    honest_out = [outcomes[p] for p in honest]
    all_abort = all(o == ABORT for o in honest_out)
    agreement = len(set(honest_out)) == 1
    sender_honest = Player.S in honest
    validity = None
    if sender_honest and not all_abort:
        validity = all(outcomes[p] == x for p in honest)
    achieved = agreement and not all_abort and (validity is not False)
    detectable = achieved or all_abort
    conflict = bool(payload and payload.conflict)
    verdict = payload.proof_verdict if payload else None
    cheat_attempt = setup.corrupted == Player.R0 and conflict and payload.proof_sent
    violations = []
    if not status_consistent:
        violations.append("split_global_status")
    if setup.guarantee and not detectable:
        violations.append("detectable_broadcast")
    if setup.corrupted is None and not achieved and not all_abort:
        violations.append("honest_broadcast")

    report = {
        "trial": index,
        "input": x,
        "corrupted": setup.corrupted.value if setup.corrupted else None,
        "status": {p.value: dist.status[p].value for p in PLAYERS},
        "outcome": {p.value: _outcome(outcomes[p]) for p in PLAYERS},
        "flags": {p.value: dist.flags[p] for p in PLAYERS},
        "payload_flags": (
            {p.value: format_value(f) for p, f in payload.flags.items()} if payload else None
        ),
        "conflict": conflict,
        "proof_size": payload.proof_size if payload else None,
        "proof_verdict": verdict,
        "detection_events": list(dist.events),
        "status_consistent": status_consistent,
        "aborted": all_abort,
        "agreement": agreement,
        "validity": validity,
        "broadcast_achieved": achieved,
        "detectable_broadcast": detectable,
        "cheat_attempt": bool(cheat_attempt),
        "cheat_accepted": bool(cheat_attempt and verdict),
        "violations": violations,
        "transcript_sha256": net.transcript.digest(),
    }
    return report, net.transcript


def wilson_interval(successes: int, n: int, confidence: float = 0.95):
    if n == 0:
        return None
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=confidence, method="wilson")
    return [float(ci.low), float(ci.high)]


def _rate(k: int, n: int):
    return k / n if n else None


def aggregate(trials: list) -> dict:
    n = len(trials)
    if n == 0:
        raise ConfigError("cannot aggregate zero trials")
    count = lambda key: sum(1 for t in trials if t[key])
    live = [t for t in trials if not t["aborted"]]
    with_validity = [t for t in trials if t["validity"] is not None]
    conflicts = [t for t in trials if t["conflict"]]
    attempts = count("cheat_attempt")
    accepted = count("cheat_accepted")
    return {
        "trials": n,
        "agreement_rate": count("agreement") / n,
        "sender_validity_rate": _rate(sum(1 for t in with_validity if t["validity"]), len(with_validity)),
        "abort_rate": count("aborted") / n,
        "broadcast_rate": count("broadcast_achieved") / n,
        "detectable_broadcast_rate": count("detectable_broadcast") / n,
        "status_consistency_rate": count("status_consistent") / n,
        "live_trials": len(live),
        "live_agreement_rate": _rate(sum(1 for t in live if t["agreement"]), len(live)),
        "conflict_rate": count("conflict") / n,
        "proof_acceptance_rate": _rate(sum(1 for t in conflicts if t["proof_verdict"]), len(conflicts)),
        "cheat_attempts": attempts,
        "cheat_accepted": accepted,
        "cheat_acceptance_rate": _rate(accepted, attempts),
        "cheat_acceptance_wilson95": wilson_interval(accepted, attempts),
        "invariant_violations": sum(1 for t in trials if t["violations"]),
    }


def _run_one(args):
    config, index = args
    report, transcript = run_trial(config, index)
    if config.transcripts:
        transcript.write(Path(config.transcripts) / f"trial_{index:06d}.jsonl")
    return report


def run_experiment(config: RunConfig, workers: int = 1) -> dict:
    if config.transcripts:
        Path(config.transcripts).mkdir(parents=True, exist_ok=True)
    strategy = config.strategy()
    jobs = [(config, i) for i in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        per_trial = [_run_one(j) for j in jobs]
    per_trial.sort(key=lambda t: t["trial"])
    return {
        "config_echo": {**config.to_json(), "strategy": strategy.label(), "guarantee": strategy.guarantee},
        "per_trial": per_trial,
        "aggregate": aggregate(per_trial),
    }


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_round_floats(report), indent=1, ensure_ascii=False) + "\n"


def emit_report(report: dict, path) -> None:
    text = dumps_report(report)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write report to {path}: {exc}") from None


# --- built-in scenario suite ----------------------------------------------

SUITE_SCENARIOS = (
    ("honest_x0", dict(adversary="HonestAll", sender_input=0)),
    ("honest_x1", dict(adversary="HonestAll", sender_input=1)),
    ("sender_split", dict(adversary="SenderSplit")),
    ("r0_bit_flip", dict(adversary="R0BitFlip")),
    ("r1_bad_states_product", dict(adversary="R1BadStatesProduct")),
)


def _check_scenario(name: str, agg: dict, per_trial: list) -> list:
    """``(criterion, passed)`` rows for one suite scenario."""
    rows = [("no invariant violations", agg["invariant_violations"] == 0)]
    if name.startswith("honest"):
        rows += [
            ("honest players agree whenever not aborted", agg["live_agreement_rate"] == 1.0),
            ("output equals sender input", agg["sender_validity_rate"] == 1.0),
            ("distribution success >= 0.99", 1 - agg["abort_rate"] >= 0.99),
        ]
    elif name == "sender_split":
        live = [t for t in per_trial if not t["aborted"]]
        rows += [
            ("receivers agree in every trial", agg["agreement_rate"] == 1.0),
            ("R1 adopts y0 via accepted proof", bool(live) and all(t["proof_verdict"] for t in live)),
        ]
    elif name == "r0_bit_flip":
        rows += [
            ("zero accepted cheats", agg["cheat_accepted"] == 0 and agg["cheat_attempts"] > 0),
            ("honest players agree", agg["agreement_rate"] == 1.0),
        ]
    elif name == "r1_bad_states_product":
        rows += [("every trial aborts", agg["abort_rate"] == 1.0)]
    return rows


def run_suite(base: RunConfig, workers: int = 1, out=None):
    out = out or sys.stdout
    reports, table = {}, []
    for name, overrides in SUITE_SCENARIOS:
        cfg = replace(base, **overrides)
        if cfg.transcripts:
            cfg = replace(cfg, transcripts=str(Path(cfg.transcripts) / name))
        rep = run_experiment(cfg, workers=workers)
        reports[name] = rep
        for crit, ok in _check_scenario(name, rep["aggregate"], rep["per_trial"]):
            table.append((name, crit, ok))
    width = max(len(n) for n, _, _ in table)
    for name, crit, ok in table:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {crit}", file=out)
    return {"suite": "paper", "scenarios": reports}, all(ok for _, _, ok in table)


# --- CLI -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qdbcast",
        description="Monte Carlo runs of three-party detectable broadcast over qutrit triplets.",
    )
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="master seed (64-bit)")
    p.add_argument("--adversary", help="strategy NAME or NAME:key=value,...")
    p.add_argument("--triplets", type=int, help="payload size m; thresholds rescale with it")
    p.add_argument("--quantum-path", choices=sorted(QUANTUM_PATHS))
    p.add_argument("--input", choices=["0", "1", "random"], help="sender's bit")
    p.add_argument("--config", help="JSON file mirroring RunConfig; flags override it")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--transcripts", help="directory for one JSONL transcript per trial")
    p.add_argument("--suite", choices=["paper"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = RunConfig.from_json(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    over = {}
    if args.trials is not None:
        over["trials"] = args.trials
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.adversary is not None:
        over["adversary"] = args.adversary
    if args.quantum_path is not None:
        over["quantum_path"] = args.quantum_path
    if args.input is not None:
        over["sender_input"] = args.input if args.input == "random" else int(args.input)
    if args.report is not None:
        over["report"] = args.report
    if args.transcripts is not None:
        over["transcripts"] = args.transcripts
    if args.triplets is not None:
        if args.triplets < 6:
            raise ConfigError("--triplets must be at least 6")
        over["bcast"] = BroadcastParams.for_size(args.triplets)
        over["dist"] = replace(cfg.dist, payload=args.triplets)
    return replace(cfg, **over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        t0 = time.perf_counter()
        if args.suite == "paper":
            report, ok = run_suite(cfg, workers=args.workers)
            violations = not ok
        else:
            report = run_experiment(cfg, workers=args.workers)
            agg = report["aggregate"]
            print(json.dumps(_round_floats(agg), indent=1, ensure_ascii=False))
            violations = agg["invariant_violations"] > 0
        log.info("finished in %.1f s", time.perf_counter() - t0)
        if cfg.report:
            emit_report(report, cfg.report)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_INVARIANT if violations else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
