"""End-to-end run orchestration: heuristics -> prompts -> completions -> vote -> report.

Every run directory is self-describing: a config snapshot, the completion
transcript (JSON Lines keyed by sample id, query index, and prompt hash), the
vote log, persisted heuristics, and the report. Reruns skip every
(sample_id, query_index, prompt_sha256) triple already present in the
transcript, which makes interrupted runs resumable and - together with
deterministic heuristics - lets ``replay_eval`` rebuild the exact report from
the transcript alone.
"""

from __future__ import annotations

import dataclasses
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .artifacts import (
    AnswerCandidate,
    Dataset,
    load_candidate_table,
    load_manifest,
    save_candidate_table,
    write_canonical_json,
)
from .errors import ArtifactError, ConfigError, GatewayError
from .evaluation import (
    EvalReport,
    SampleOutcome,
    behavior_classify,
    evaluate_outcomes,
    example_hit_rate,
    soft_score,
)
from .gateway import (
    CompletionRequest,
    Gateway,
    GatewayConfig,
    HttpGateway,
    candidate_oracle_gateway,
    echo_top1_gateway,
    prompt_sha256,
    scripted_gateway,
)
from .heuristics import (
    SELECTION_STRATEGIES,
    ExampleSelection,
    combined_knn,
    grouped_knn,
    top_k_candidates,
)
from .prompts import PromptBundle, PromptConfig, build_prompts
from .voting import VoteRecord, vote

PIPELINE_STRATEGIES = SELECTION_STRATEGIES + ("grouped",)
DEFAULT_HIT_RATE_KS = (1, 5, 10)

_CONFIG_KEYS = {
    "manifest", "out_dir", "task_format", "k", "n_examples", "queries",
    "include_head", "include_scores", "include_caption", "include_tags",
    "score_decimals", "max_prompt_chars", "strategy", "seed", "workers",
    "metric", "tau", "hit_rate_ks", "raw_voting", "dump_prompts",
    "gateway_mode", "mock_policy", "oracle_table", "script_table",
    "endpoint_url", "model", "api_key_env", "max_in_flight", "retries",
    "backoff_base_ms", "timeout_ms", "max_tokens",
}


@dataclass
class RunConfig:
    manifest: str
    out_dir: str
    task_format: str = "standard"
    k: int = 10
    n_examples: int = 16
    queries: int = 5
    include_head: bool = True
    include_scores: bool = True
    include_caption: bool = True
    include_tags: bool = False
    score_decimals: int = 2
    max_prompt_chars: int | None = None
    strategy: str = "fused"
    seed: int | None = None
    workers: int = 1
    metric: str = "simple"
    tau: float = 1.0
    hit_rate_ks: tuple[int, ...] = DEFAULT_HIT_RATE_KS
    raw_voting: bool = False
    dump_prompts: str | None = None
    gateway_mode: str = "mock"
    mock_policy: str = "echo_top1"
    oracle_table: str | None = None
    script_table: str | None = None
    endpoint_url: str = ""
    model: str = ""
    api_key_env: str = ""
    max_in_flight: int = 4
    retries: int = 5
    backoff_base_ms: int = 100
    timeout_ms: int = 30000
    max_tokens: int = 16

    def __post_init__(self) -> None:
        if self.strategy not in PIPELINE_STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}, expected one of {PIPELINE_STRATEGIES}"
            )
        if self.strategy == "rand" and self.seed is None:
            raise ConfigError("strategy 'rand' requires a seed")
        if self.gateway_mode not in ("mock", "http"):
            raise ConfigError(f"unknown gateway mode {self.gateway_mode!r}")
        if self.gateway_mode == "mock" and self.mock_policy not in (
            "echo_top1", "candidate_oracle", "scripted",
        ):
            raise ConfigError(f"unknown mock policy {self.mock_policy!r}")
        if self.metric not in ("simple", "official"):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def prompt_config(self) -> PromptConfig:
        return PromptConfig(
            task_format=self.task_format,
            k=self.k,
            n_examples=self.n_examples,
            queries=self.queries,
            include_head=self.include_head,
            include_scores=self.include_scores,
            include_caption=self.include_caption,
            include_tags=self.include_tags,
            score_decimals=self.score_decimals,
            max_prompt_chars=self.max_prompt_chars,
        )

    def to_json_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["hit_rate_ks"] = list(self.hit_rate_ks)
        return doc


def parse_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` config file; values parse as JSON scalars when
    possible and fall back to bare strings."""
    result: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            result[key] = json.loads(value)
        except json.JSONDecodeError:
            result[key] = value
    return result


def make_run_config(mapping: Mapping) -> RunConfig:
    unknown = set(mapping) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "manifest" not in mapping or "out_dir" not in mapping:
        raise ConfigError("config needs 'manifest' and 'out_dir'")
    kwargs = dict(mapping)
    if "hit_rate_ks" in kwargs:
        value = kwargs["hit_rate_ks"]
        if isinstance(value, str):
            value = [int(v) for v in value.split(",") if v.strip()]
        kwargs["hit_rate_ks"] = tuple(int(v) for v in value)
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# Stage-1 heuristics over a dataset


@dataclass
class Heuristics:
    """Stage-1 outputs for a dataset under one run configuration."""

    eval_candidates: dict[str, list[AnswerCandidate]]  # test id -> top-k_eval
    train_candidates: dict[str, list[AnswerCandidate]]  # train id -> top-cfg.k
    selections: dict[str, ExampleSelection]
    k_eval: int


def _train_views(dataset: Dataset, kinds: Sequence[str], grouped: bool = False):
    train_ids = [s.id for s in dataset.split_samples("train")]
    views = {}
    for kind in kinds:
        bank = dataset.bank(kind, grouped=grouped)
        views[kind] = bank.subset(train_ids)
    return views


_STRATEGY_KINDS = {
    "rand": ("fused",),
    "ques_img": ("question", "image"),
    "fused": ("fused",),
    "fused_ques_img": ("fused", "question", "image"),
    "answer_logits": ("answer_logits",),
}


def compute_heuristics(dataset: Dataset, config: RunConfig) -> Heuristics:
    test_samples = dataset.split_samples("test")
    train_samples = dataset.split_samples("train")
    if not test_samples:
        raise ConfigError("manifest has no test samples")

    k_eval = max([1, config.k, *config.hit_rate_ks])
    k_eval = min(k_eval, dataset.vocab.size)
    if config.k > dataset.vocab.size:
        raise ConfigError(
            f"k={config.k} exceeds vocabulary size {dataset.vocab.size}"
        )

    eval_candidates: dict[str, list[AnswerCandidate]] = {}
    train_candidates: dict[str, list[AnswerCandidate]] = {}
    if dataset.candidates_source == "precomputed":
        table = load_candidate_table(dataset.root / dataset.candidates_path)
        for s in test_samples:
            if s.id not in table:
                raise ArtifactError(f"precomputed candidate table misses test id {s.id!r}")
            eval_candidates[s.id] = table[s.id][:k_eval]
        for s in train_samples:
            if s.id in table:
                train_candidates[s.id] = table[s.id][: config.k]
    else:
        logits = dataset.bank("answer_logits")
        for s in test_samples:
            eval_candidates[s.id] = top_k_candidates(logits.row(s.id), dataset.vocab, k_eval)
        if config.k > 0:
            for s in train_samples:
                train_candidates[s.id] = top_k_candidates(
                    logits.row(s.id), dataset.vocab, config.k
                )

    selections: dict[str, ExampleSelection] = {}
    n_total = config.n_examples * config.queries
    if n_total > 0:
        if config.strategy == "grouped":
            grouped_bank = dataset.bank("fused", grouped=True)
            train_view = grouped_bank.subset([s.id for s in train_samples])
            for s in test_samples:
                selections[s.id] = grouped_knn(
                    grouped_bank.group_by_id(s.id), train_view, n_total,
                    exclude={s.id}, test_sample_id=s.id,
                )
        else:
            kinds = _STRATEGY_KINDS[config.strategy]
            views = _train_views(dataset, kinds)
            full = {kind: dataset.bank(kind) for kind in kinds}
            for i, s in enumerate(test_samples):
                queries = {kind: full[kind].row(s.id) for kind in kinds}
                seed = None if config.seed is None else [int(config.seed), i]
                selections[s.id] = combined_knn(
                    s.id, config.strategy, queries, views, n_total, seed=seed,
                )
    return Heuristics(eval_candidates, train_candidates, selections, k_eval)


def build_all_prompts(
    dataset: Dataset, heur: Heuristics, config: RunConfig
) -> dict[str, PromptBundle]:
    cfg = config.prompt_config()
    examples = {
        sid: (dataset.by_id[sid], heur.train_candidates.get(sid, []))
        for sid in {n for sel in heur.selections.values() for n in sel.neighbor_ids}
    }
    bundles = {}
    for sample in dataset.split_samples("test"):
        bundles[sample.id] = build_prompts(
            sample,
            heur.eval_candidates[sample.id][: config.k],
            heur.selections.get(sample.id),
            examples,
            cfg,
        )
    return bundles


# --------------------------------------------------------------------------
# Gateways and transcripts


def make_gateway(config: RunConfig, manifest_dir: Path) -> Gateway:
    if config.gateway_mode == "http":
        return HttpGateway(GatewayConfig(
            endpoint_url=config.endpoint_url,
            model=config.model,
            api_key_env=config.api_key_env,
            max_in_flight=config.max_in_flight,
            retries=config.retries,
            backoff_base_ms=config.backoff_base_ms,
            timeout_ms=config.timeout_ms,
        ))
    if config.mock_policy == "echo_top1":
        return echo_top1_gateway()
    if config.mock_policy == "candidate_oracle":
        table_path = Path(config.oracle_table) if config.oracle_table else manifest_dir / "oracle_answers.json"
        if not table_path.exists():
            raise ConfigError(f"candidate_oracle mock needs an oracle table; missing {table_path}")
        doc = json.loads(table_path.read_text(encoding="utf-8"))
        return candidate_oracle_gateway(doc["by_question"])
    if config.mock_policy == "scripted":
        if not config.script_table:
            raise ConfigError("scripted mock needs script_table")
        doc = json.loads(Path(config.script_table).read_text(encoding="utf-8"))
        return scripted_gateway(doc)
    raise ConfigError(f"unknown mock policy {config.mock_policy!r}")


class TranscriptLog:
    """Append-only JSON Lines log of completions, keyed for resume.

    Appends are serialized by a lock so pipeline workers can share one log.
    """

    def __init__(self, path: Path):
        self.path = path
        self.records: dict[tuple[str, int, str], dict] = {}
        self._lock = threading.Lock()
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                if "prompt_sha256" in rec:
                    self.records[(rec["sample_id"], rec["query_index"], rec["prompt_sha256"])] = rec

    def get(self, sample_id: str, query_index: int, sha: str) -> dict | None:
        return self.records.get((sample_id, query_index, sha))

    def append(self, record: dict) -> None:
        with self._lock:
            self.records[(record["sample_id"], record["query_index"], record["prompt_sha256"])] = record
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# Run and replay


@dataclass
class RunResult:
    report: EvalReport
    votes: list[VoteRecord]
    failed: list[str] = field(default_factory=list)


def _score_outcomes(
    dataset: Dataset,
    config: RunConfig,
    heur: Heuristics,
    answers_by_sample: Mapping[str, list[str]],
    failed: Sequence[str],
) -> tuple[list[SampleOutcome], list[VoteRecord], EvalReport]:
    outcomes: list[SampleOutcome] = []
    votes: list[VoteRecord] = []
    test_samples = dataset.split_samples("test")
    for sample in test_samples:
        if sample.id not in answers_by_sample:
            continue
        cands = heur.eval_candidates[sample.id]
        prompt_cands = cands[: config.k]
        record = vote(sample.id, answers_by_sample[sample.id], prompt_cands,
                      raw_voting=config.raw_voting)
        votes.append(record)
        stage1 = cands[0].answer
        outcomes.append(SampleOutcome(
            sample_id=sample.id,
            category=sample.category or "(none)",
            stage1_answer=stage1,
            stage1_score=soft_score(stage1, sample, config.metric),
            final_answer=record.final_answer,
            stage2_score=soft_score(record.final_answer, sample, config.metric),
            behavior=behavior_classify(record.final_answer, prompt_cands, config.k),
        ))

    example_hit = None
    if heur.selections:
        gold_of = {s.id: s.modal_answer() for s in dataset.split_samples("train")}
        example_hit = example_hit_rate(
            {sid: sel.neighbor_ids for sid, sel in heur.selections.items()},
            [s for s in test_samples if s.id in answers_by_sample],
            gold_of,
            config.metric,
        )

    ks = [k for k in config.hit_rate_ks if k <= heur.k_eval]
    report = evaluate_outcomes(
        outcomes,
        heur.eval_candidates,
        test_samples,
        hit_rate_ks=ks,
        tau=config.tau,
        metric=config.metric,
        failed_sample_ids=failed,
        example_hit=example_hit,
    )
    return outcomes, votes, report


def persist_heuristics(out: Path, heur: Heuristics) -> None:
    save_candidate_table(
        {sid: cands for sid, cands in sorted(heur.eval_candidates.items())},
        out / "candidates.json",
    )
    write_canonical_json(
        {
            sid: {
                "neighbor_ids": list(sel.neighbor_ids),
                "similarities": list(sel.similarities),
            }
            for sid, sel in sorted(heur.selections.items())
        },
        out / "selections.json",
    )


def _write_votes(out: Path, votes: Sequence[VoteRecord]) -> None:
    with (out / "votes.jsonl").open("w", encoding="utf-8") as fh:
        for v in votes:
            fh.write(json.dumps({
                "sample_id": v.sample_id,
                "per_query": [
                    {
                        "query_index": q.query_index,
                        "parsed_answer": q.parsed_answer,
                        "normalized_answer": q.normalized_answer,
                    }
                    for q in v.per_query
                ],
                "final_answer": v.final_answer,
                "tie_broken": v.tie_broken,
            }, sort_keys=True) + "\n")


def write_report(out: Path, report: EvalReport) -> None:
    from .reporting import render_markdown

    write_canonical_json(report.to_json_dict(), out / "report.json")
    (out / "report.md").write_text(render_markdown(report.to_json_dict()), encoding="utf-8")


def run_pipeline(config: RunConfig) -> RunResult:
    dataset = load_manifest(config.manifest)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_canonical_json(config.to_json_dict(), out / "config_snapshot.json")

    heur = compute_heuristics(dataset, config)
    persist_heuristics(out, heur)
    bundles = build_all_prompts(dataset, heur, config)

    if config.dump_prompts:
        dump_dir = Path(config.dump_prompts)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for sid, bundle in sorted(bundles.items()):
            for t, prompt in enumerate(bundle.prompts):
                (dump_dir / f"{sid}_q{t}.txt").write_text(prompt, encoding="utf-8")

    gateway = make_gateway(config, dataset.root)
    transcript = TranscriptLog(out / "transcript.jsonl")

    def complete_sample(sample) -> list[str] | None:
        answers = []
        try:
            for t, prompt in enumerate(bundles[sample.id].prompts):
                sha = prompt_sha256(prompt)
                cached = transcript.get(sample.id, t, sha)
                if cached is not None:
                    answers.append(cached["parsed_answer"])
                    continue
                result = gateway.complete(CompletionRequest(
                    prompt=prompt, max_tokens=config.max_tokens,
                ))
                transcript.append({
                    "sample_id": sample.id,
                    "query_index": t,
                    "prompt_sha256": sha,
                    "raw_text": result.raw_text,
                    "parsed_answer": result.parsed_answer,
                    "latency_ms": result.latency_ms,
                })
                answers.append(result.parsed_answer)
        except GatewayError:
            return None
        return answers

    test_samples = dataset.split_samples("test")
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            per_sample = list(pool.map(complete_sample, test_samples))
    else:
        per_sample = [complete_sample(sample) for sample in test_samples]

    answers_by_sample: dict[str, list[str]] = {}
    failed: list[str] = []
    for sample, answers in zip(test_samples, per_sample):
        if answers is None:
            failed.append(sample.id)
        else:
            answers_by_sample[sample.id] = answers

    _, votes, report = _score_outcomes(dataset, config, heur, answers_by_sample, failed)
    _write_votes(out, votes)
    write_report(out, report)
    return RunResult(report=report, votes=votes, failed=failed)


def replay_eval(run_dir: str | Path, verify_prompts: bool = True) -> EvalReport:
    """Recompute the report from the run directory's transcript alone."""
    run_dir = Path(run_dir)
    snapshot_path = run_dir / "config_snapshot.json"
    if not snapshot_path.exists():
        raise ConfigError(f"missing config snapshot: {snapshot_path}")
    snapshot = json.loads(snapshot_path.read_text(encoding="utf-8"))
    config = make_run_config(snapshot)
    dataset = load_manifest(config.manifest)

    heur = compute_heuristics(dataset, config)
    transcript = TranscriptLog(run_dir / "transcript.jsonl")

    bundles = build_all_prompts(dataset, heur, config) if verify_prompts else None

    answers_by_sample: dict[str, list[str]] = {}
    failed: list[str] = []
    for sample in dataset.split_samples("test"):
        answers: list[str] = []
        ok = True
        for t in range(config.queries):
            if bundles is not None:
                sha = prompt_sha256(bundles[sample.id].prompts[t])
                rec = transcript.get(sample.id, t, sha)
            else:
                rec = next(
                    (r for (sid, qi, _), r in transcript.records.items()
                     if sid == sample.id and qi == t),
                    None,
                )
            if rec is None:
                ok = False
                break
            answers.append(rec["parsed_answer"])
        if ok:
            answers_by_sample[sample.id] = answers
        else:
            failed.append(sample.id)

    _, votes, report = _score_outcomes(dataset, config, heur, answers_by_sample, failed)
    _write_votes(run_dir, votes)
    write_report(run_dir, report)
    return report
