"""Seeded verification campaigns, counterexample search and report files.

Trial ``i`` of a campaign with seed ``s`` uses the instance seed
``SeedSequence(s, spawn_key=(i,)).generate_state(1, uint64)[0]`` (numpy's
documented spawn hash), so a trial's outcome depends only on ``(s, i)`` and the
configuration, never on scheduling or worker count.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .errors import DomainEscape, EmptySample, NotNormalizable
from .model import GeneratorConfig, Instance, Mode, generate_instance
from .space import NormSpec
from .uncertainty import (
    DEFAULT_ATOL,
    DEFAULT_REFINE_BUDGET,
    DEFAULT_RTOL,
    EMPIRICAL,
    PASS,
    VIOLATION,
    ChainReport,
    build_chain,
    chain_nhrs,
    corollary_anticommutator,
    corollary_commutator,
    hilbert_reduction_check,
    nhrs_parts,
    robertson_chain,
    schrodinger_chain,
)

SKIPPED = "skipped"
# the reduction identity is checked at 1e-9 * (1 + delta)
REDUCTION_TOL = 1e-9

# slack whose minimum picks the stored witness instance, per mode
WITNESS_SLACK = {
    Mode.HILBERT: ("robertson", "product>=robertson_bound"),
    Mode.BANACH_LINEAR: ("nhrs", "product>=final_bound"),
    Mode.BANACH_NONLINEAR: ("nhrs", "product>=final_bound"),
}

CHAIN_SCHEMA = {
    "nhrs": (
        ["nabla", "delta", "half_sum_squares", "quarter_square_sum", "product", "middle_form",
         "final_bound", "nabla_upper", "product_upper"],
        ["half_sum_squares>=quarter_square_sum", "quarter_square_sum>=product",
         "product>=middle_form", "product>=final_bound", "product_upper>=final_bound"],
    ),
    "commutator": (
        ["nabla_delta_b", "fb_norm", "delta_a", "lhs", "rhs"],
        ["lhs>=rhs"],
    ),
    "anticommutator": (
        ["nabla_delta_b", "fb_norm", "delta_a", "delta_a_neg_x", "lhs", "rhs"],
        ["lhs>=rhs"],
    ),
    "robertson": (
        ["delta_a", "delta_b", "half_sum_squares", "quarter_square_sum", "product",
         "robertson_bound"],
        ["half_sum_squares>=quarter_square_sum", "quarter_square_sum>=product",
         "product>=robertson_bound"],
    ),
    "schrodinger": (
        ["product", "covariance_form", "identity_form", "robertson_bound"],
        ["product>=covariance_form", "covariance_form>=identity_form",
         "identity_form>=covariance_form", "covariance_form>=robertson_bound"],
    ),
    "reduction_a": (["nabla", "delta"], ["nabla>=delta", "delta>=nabla"]),
    "reduction_b": (["nabla", "delta"], ["nabla>=delta", "delta>=nabla"]),
}

CSV_COLUMNS = ["trial", "seed", "mode", "dim", "p", "status"] + [
    f"{chain}.{name}" for chain, (terms, slacks) in CHAIN_SCHEMA.items()
    for name in terms + [f"slack[{s}]" for s in slacks]
]


@dataclass(frozen=True)
class CampaignConfig:
    mode: Mode = Mode.HILBERT
    trials: int = 1000
    seed: int = 0
    dim: int = 3
    p: float = 2.0
    cloud_size: int = 64
    refine_budget: int = DEFAULT_REFINE_BUDGET
    atol: float = DEFAULT_ATOL
    rtol: float = DEFAULT_RTOL
    dim_max: int | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.mode is Mode.HILBERT:
            object.__setattr__(self, "p", 2.0)
        object.__setattr__(self, "p", NormSpec(self.p).p)
        if self.trials < 0:
            raise ValueError("trials must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if self.dim_max is not None and self.dim_max < self.dim:
            raise ValueError("dim_max must be at least dim")
        if self.cloud_size < 2:
            raise ValueError("cloud_size must be at least 2")
        if self.refine_budget < 0:
            raise ValueError("refine budget must be non-negative")
        if self.atol < 0 or self.rtol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def to_json(self):
        out = asdict(self)
        out["mode"] = self.mode.value
        out["p"] = NormSpec(self.p).to_json()
        # worker count never changes results, so it stays out of the echo
        del out["workers"]
        return out

    def trial_dim(self, index: int) -> int:
        if self.dim_max is None:
            return self.dim
        return self.dim + index % (self.dim_max - self.dim + 1)

    def generator(self, index: int) -> GeneratorConfig:
        return GeneratorConfig(self.mode, self.trial_dim(index), self.p, self.cloud_size)

    def settings(self) -> dict:
        return {"refine_budget": self.refine_budget, "atol": self.atol, "rtol": self.rtol}


def trial_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _reduction_chain(name, op, h) -> ChainReport:
    r = hilbert_reduction_check(op, h)
    return build_chain(name, {"nabla": r.nabla, "delta": r.delta},
                       [("nabla", "delta"), ("delta", "nabla")],
                       atol=REDUCTION_TOL, rtol=REDUCTION_TOL)


def evaluate_instance(inst: Instance, refine_budget: int = DEFAULT_REFINE_BUDGET,
                      atol: float = DEFAULT_ATOL, rtol: float = DEFAULT_RTOL) -> dict:
    """Every chain that applies to the instance's mode, keyed by chain name.

    Raises DomainEscape when a composition point leaves a domain ball.
    """
    chains = {}
    if inst.mode is Mode.HILBERT:
        a, b, h = inst.A.matrix, inst.B.matrix, inst.x
        chains["robertson"] = robertson_chain(a, b, h, atol, rtol)
        chains["schrodinger"] = schrodinger_chain(a, b, h, atol, rtol)
        chains["reduction_a"] = _reduction_chain("reduction_a", a, h)
        chains["reduction_b"] = _reduction_chain("reduction_b", b, h)
    parts = nhrs_parts(inst, refine_budget)
    chains["nhrs"] = chain_nhrs(inst, refine_budget, atol, rtol, parts)
    chains["commutator"] = corollary_commutator(inst, refine_budget, atol, rtol, parts)
    chains["anticommutator"] = corollary_anticommutator(inst, refine_budget, atol, rtol, parts)
    return chains


def trial_status(chains: dict) -> str:
    statuses = {c.status for c in chains.values()}
    for s in (VIOLATION, EMPIRICAL):
        if s in statuses:
            return s
    return PASS


def run_trial(cfg: CampaignConfig, index: int) -> dict:
    seed = trial_seed(cfg.seed, index)
    record = {"type": "trial", "trial": index, "seed": seed, "mode": cfg.mode.value,
              "dim": cfg.trial_dim(index), "p": NormSpec(cfg.p).to_json()}
    try:
        inst = generate_instance(seed, cfg.generator(index))
        chains = evaluate_instance(inst, **cfg.settings())
    except DomainEscape as exc:
        record.update(status=SKIPPED, reason="domain-escape", detail=str(exc))
        return record
    except (NotNormalizable, EmptySample) as exc:
        record.update(status=SKIPPED, reason=type(exc).__name__, detail=str(exc))
        return record
    record["status"] = trial_status(chains)
    record["chains"] = {name: c.to_json() for name, c in chains.items()}
    return record


@dataclass
class CampaignReport:
    config: dict
    trials: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    skip_reasons: dict = field(default_factory=dict)
    min_slack: dict = field(default_factory=dict)
    worst: dict | None = None

    def summary(self) -> dict:
        return {"type": "summary", "config": self.config, "counts": self.counts,
                "skip_reasons": self.skip_reasons, "min_slack": self.min_slack,
                "worst": self.worst}

    @property
    def violations(self) -> int:
        return self.counts.get("violations", 0)


def _empty_counts() -> dict:
    return {"passed": 0, "empirical_negative": 0, "violations": 0, "skipped": 0}


_BUCKET = {PASS: "passed", EMPIRICAL: "empirical_negative", VIOLATION: "violations",
           SKIPPED: "skipped"}


def witness_document(inst: Instance, settings: dict, chains: dict) -> dict:
    """Replayable record: the instance, the evaluation settings and its chains."""
    return {"kind": "witness", "settings": dict(settings), "instance": inst.to_json(),
            "status": trial_status(chains),
            "chains": {name: c.to_json() for name, c in chains.items()}}


def aggregate(cfg: CampaignConfig, records: list) -> CampaignReport:
    records = sorted(records, key=lambda r: r["trial"])
    counts, reasons, mins = _empty_counts(), {}, {}
    worst_key = None
    chain_name, slack_name = WITNESS_SLACK[cfg.mode]
    for rec in records:
        counts[_BUCKET[rec["status"]]] += 1
        if rec["status"] == SKIPPED:
            reasons[rec["reason"]] = reasons.get(rec["reason"], 0) + 1
            continue
        for cname, chain in rec["chains"].items():
            for sname, val in chain["slacks"].items():
                key = f"{cname}/{sname}"
                if key not in mins or val < mins[key]:
                    mins[key] = val
        val = rec["chains"][chain_name]["slacks"][slack_name]
        if worst_key is None or val < worst_key[0]:
            worst_key = (val, rec["trial"])
    worst = None
    if worst_key is not None:
        index = worst_key[1]
        inst = generate_instance(trial_seed(cfg.seed, index), cfg.generator(index))
        chains = evaluate_instance(inst, **cfg.settings())
        worst = {"trial": index, "chain": chain_name, "slack": slack_name,
                 "value": worst_key[0], **witness_document(inst, cfg.settings(), chains)}
    return CampaignReport(cfg.to_json(), records, counts, reasons, mins, worst)


def run_campaign(cfg: CampaignConfig) -> CampaignReport:
    """Run ``cfg.trials`` seeded trials; output is independent of ``cfg.workers``."""
    task = partial(run_trial, cfg)
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunk = max(1, cfg.trials // (4 * cfg.workers))
            records = list(pool.map(task, range(cfg.trials), chunksize=chunk))
    else:
        records = [task(i) for i in range(cfg.trials)]
    return aggregate(cfg, records)


# ---------------------------------------------------------------------------
# counterexample search


@dataclass
class SearchResult:
    found: bool
    trials_run: int
    min_slack: float | None
    min_trial: int | None
    empirical_negative: int
    skipped: int
    witness: dict | None

    def to_json(self):
        return asdict(self)


def search_counterexample(cfg: CampaignConfig) -> SearchResult:
    """Probe the final form of the nonlinear chain.

    Stops at the first trial whose final-form slack stays negative beyond the
    tolerance even after ``nabla`` is replaced by its catalog upper bound, i.e.
    ``nabla_upper * delta < |f(ABx) - f(Ax)f(Bx)| - tol``. Otherwise reports
    the minimum final-form slack seen, with a replayable witness.
    """
    if cfg.mode is not Mode.BANACH_NONLINEAR:
        raise ValueError("counterexample search runs in banach-nonlinear mode only")
    best = None
    empirical = skipped = 0
    trials_run = 0
    for index in range(cfg.trials):
        trials_run += 1
        seed = trial_seed(cfg.seed, index)
        try:
            inst = generate_instance(seed, cfg.generator(index))
            chains = evaluate_instance(inst, **cfg.settings())
        except (DomainEscape, NotNormalizable, EmptySample):
            skipped += 1
            continue
        nhrs = chains["nhrs"]
        slack = nhrs.slacks["product>=final_bound"]
        if slack < -nhrs.tol:
            empirical += 1
        if best is None or slack < best[0]:
            best = (slack, index, inst, chains)
        if nhrs.slacks["product_upper>=final_bound"] < -nhrs.tol:
            doc = {"trial": index, **witness_document(inst, cfg.settings(), chains)}
            return SearchResult(True, trials_run, slack, index, empirical, skipped, doc)
    if best is None:
        return SearchResult(False, trials_run, None, None, empirical, skipped, None)
    slack, index, inst, chains = best
    doc = {"trial": index, **witness_document(inst, cfg.settings(), chains)}
    return SearchResult(False, trials_run, slack, index, empirical, skipped, doc)


def replay(document: dict) -> dict:
    """Re-evaluate a witness document (or a bare instance) and return its chains."""
    if "instance" in document:
        inst = Instance.from_json(document["instance"])
        settings = document.get("settings", {})
    else:
        inst, settings = Instance.from_json(document), {}
    return evaluate_instance(inst, **settings)


# ---------------------------------------------------------------------------
# report files


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def emit_report(report: CampaignReport, fmt: str, destination) -> Path:
    """Write ``report`` as JSON Lines (trials then a summary line) or CSV."""
    path = Path(destination)
    fmt = fmt.lower()
    if fmt in ("json", "jsonl", "jsonlines"):
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for rec in report.trials:
                fh.write(_dumps(rec) + "\n")
            fh.write(_dumps(report.summary()) + "\n")
    elif fmt == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in report.trials:
                writer.writerow(_csv_row(rec))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return "" if value is None else str(value)


def _csv_row(rec: dict) -> list:
    cells = {k: rec.get(k) for k in ("trial", "seed", "mode", "dim", "p", "status")}
    for cname, chain in rec.get("chains", {}).items():
        for name, val in chain["terms"].items():
            cells[f"{cname}.{name}"] = val
        for name, val in chain["slacks"].items():
            cells[f"{cname}.slack[{name}]"] = val
    return [_fmt(cells.get(col)) for col in CSV_COLUMNS]


def load_report(source) -> CampaignReport:
    """Parse a JSON Lines report written by :func:`emit_report`."""
    trials, summary = [], None
    with Path(source).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("type") == "summary":
                summary = obj
            else:
                trials.append(obj)
    if summary is None:
        raise ValueError("report has no summary line")
    return CampaignReport(summary["config"], trials, summary["counts"], summary["skip_reasons"],
                          summary["min_slack"], summary["worst"])

