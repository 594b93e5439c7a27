"""Execution-accuracy scoring, run reports, ablations, and rate estimation.

A prediction scores correct when its result set matches the gold SQL's
result set on the task database: compared as multisets unless the gold
query orders its output at the top level, in which case row order
matters. Text, integers and NULLs must match exactly; floating values
match within 1e-6 relative tolerance.
"""

import re
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .agents import Actor, Critic
from .engine import ACConfig, ACTrace, ActorError, read_traces, run_ac_loop, write_trace
from .spider_data import SpiderTask, SchemaIndex, database_path, schema_to_ddl
from .sqlexec import DatabaseUnavailable, QueryFailure, run_query

FLOAT_RTOL = 1e-6


class GoldExecutionError(Exception):
    """The gold SQL itself failed; the task cannot be scored."""


# ---------------------------------------------------------------------------
# Result-set comparison
# ---------------------------------------------------------------------------


def _mask_quoted_and_nested(sql: str) -> str:
    """Blank out quoted literals and parenthesized regions, keeping offsets."""
    out = []
    depth = 0
    quote: str | None = None
    for ch in sql:
        if quote is not None:
            out.append(" ")
            if ch == quote:
                quote = None
        elif ch in ("'", '"'):
            out.append(" ")
            quote = ch
        elif ch == "(":
            depth += 1
            out.append(" ")
        elif ch == ")":
            depth = max(0, depth - 1)
            out.append(" ")
        else:
            out.append(ch if depth == 0 else " ")
    return "".join(out)


def has_top_level_order_by(sql: str) -> bool:
    return re.search(r"\border\s+by\b", _mask_quoted_and_nested(sql), re.IGNORECASE) is not None


def _cell_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    a_num = isinstance(a, (int, float)) and not isinstance(a, bool)
    b_num = isinstance(b, (int, float)) and not isinstance(b, bool)
    if a_num and b_num and (isinstance(a, float) or isinstance(b, float)):
        if a == b:
            return True
        return abs(a - b) <= FLOAT_RTOL * max(abs(a), abs(b))
    return type(a) is type(b) and a == b


def _sort_key(row: Sequence) -> tuple:
    key = []
    for cell in row:
        if cell is None:
            key.append((0, ""))
        elif isinstance(cell, (int, float)) and not isinstance(cell, bool):
            key.append((1, float(cell)))
        elif isinstance(cell, bytes):
            key.append((2, cell.hex()))
        else:
            key.append((3, str(cell)))
    return tuple(key)


def result_sets_match(
    predicted_rows: list[tuple], gold_rows: list[tuple], ordered: bool
) -> bool:
    if len(predicted_rows) != len(gold_rows):
        return False
    if not ordered:
        predicted_rows = sorted(predicted_rows, key=_sort_key)
        gold_rows = sorted(gold_rows, key=_sort_key)
    return all(
        len(p) == len(g) and all(_cell_equal(a, b) for a, b in zip(p, g))
        for p, g in zip(predicted_rows, gold_rows)
    )


def execution_accuracy(
    predicted_sql: str,
    gold_sql: str,
    database: str | Path,
    timeout: float = 30.0,
) -> bool:
    """Score one prediction against the gold SQL by executing both.

    A failing or timed-out prediction scores False; a failing gold query
    raises GoldExecutionError so the caller can exclude the task.
    """
    try:
        gold_rows, gold_cols = run_query(database, gold_sql, timeout=timeout)
    except QueryFailure as exc:
        raise GoldExecutionError(f"gold SQL failed: {exc}") from exc
    try:
        predicted_rows, predicted_cols = run_query(database, predicted_sql, timeout=timeout)
    except QueryFailure:
        return False
    if predicted_cols != gold_cols:
        return False
    return result_sets_match(predicted_rows, gold_rows, has_top_level_order_by(gold_sql))


# ---------------------------------------------------------------------------
# Run reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    dataset_name: str
    mode: str
    n_tasks: int
    ex: float
    n_excluded: int = 0
    baseline_ex: float | None = None

    @property
    def error_rate(self) -> float:
        return 1.0 - self.ex

    @property
    def abs_improvement(self) -> float | None:
        if self.baseline_ex is None:
            return None
        return self.ex - self.baseline_ex

    @property
    def rel_error_reduction(self) -> float | None:
        if self.baseline_ex is None or self.baseline_ex >= 1.0:
            return None
        return (self.ex - self.baseline_ex) / (1.0 - self.baseline_ex)

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset_name,
            "mode": self.mode,
            "n_tasks": self.n_tasks,
            "n_excluded": self.n_excluded,
            "ex": self.ex,
            "error_rate": self.error_rate,
            "baseline_ex": self.baseline_ex,
            "abs_improvement": self.abs_improvement,
            "rel_error_reduction": self.rel_error_reduction,
        }


def format_reports(reports: Sequence[EvalReport]) -> str:
    """Aligned text table, one row per report."""

    def pct(value: float | None) -> str:
        return "-" if value is None else f"{100.0 * value:.1f}"

    headers = ["dataset", "mode", "n", "EX(%)", "Abs(%)", "Rel(%)"]
    rows = [
        [
            r.dataset_name or "-",
            r.mode,
            str(r.n_tasks),
            pct(r.ex),
            pct(r.abs_improvement),
            pct(r.rel_error_reduction),
        ]
        for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)


class _CorrectnessCache:
    """Memoized per-database execution scoring over one trace set."""

    def __init__(self, db_dir: str | Path, timeout: float):
        self.db_dir = Path(db_dir)
        self.timeout = timeout
        self._memo: dict[tuple[str, str, str], bool] = {}

    def score(self, sql: str, gold_sql: str, db_id: str) -> bool:
        key = (db_id, gold_sql, sql)
        if key not in self._memo:
            self._memo[key] = execution_accuracy(
                sql, gold_sql, database_path(self.db_dir, db_id), timeout=self.timeout
            )
        return self._memo[key]


def evaluate_run(
    traces: Iterable[ACTrace],
    db_dir: str | Path,
    dataset_name: str = "",
    baseline_ex: float | None = None,
    timeout: float = 30.0,
) -> EvalReport:
    """Score final SQL of every trace; order of traces does not matter.

    Tasks without gold SQL or whose gold fails to execute are excluded
    from the denominator and counted in n_excluded.
    """
    cache = _CorrectnessCache(db_dir, timeout)
    modes = set()
    scored = 0
    correct = 0
    excluded = 0
    for trace in traces:
        modes.add(trace.config.critic_mode)
        if trace.task.gold_sql is None:
            excluded += 1
            continue
        try:
            ok = cache.score(trace.final_sql, trace.task.gold_sql, trace.task.db_id)
        except (GoldExecutionError, DatabaseUnavailable):
            excluded += 1
            continue
        scored += 1
        correct += ok
    return EvalReport(
        dataset_name=dataset_name,
        mode=modes.pop() if len(modes) == 1 else ("mixed" if modes else ""),
        n_tasks=scored,
        ex=correct / scored if scored else 0.0,
        n_excluded=excluded,
        baseline_ex=baseline_ex,
    )


# ---------------------------------------------------------------------------
# (p, q, s) estimation from traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PQSCounts:
    first_pass_correct: int = 0
    first_pass_total: int = 0
    wrong_checked: int = 0
    wrong_accepted: int = 0
    correct_checked: int = 0
    correct_rejected: int = 0


@dataclass(frozen=True)
class PQSEstimate:
    p_hat: float | None
    q_hat: float | None
    s_hat: float | None
    counts: PQSCounts
    n_excluded: int = 0

    def to_json_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "q_hat": self.q_hat,
            "s_hat": self.s_hat,
            "counts": self.counts.__dict__,
            "n_excluded": self.n_excluded,
        }


def estimate_pqs(
    traces: Iterable[ACTrace], db_dir: str | Path, timeout: float = 30.0
) -> PQSEstimate:
    """Estimate actor and critic rates from traces with gold SQL.

    p from first-iteration generations; q and s pooled over every
    critic-checked generation, scoring each generation by execution
    accuracy and reading the iteration's overall verdict. Estimates with
    empty denominators are reported as None, never as zero.
    """
    cache = _CorrectnessCache(db_dir, timeout)
    counts = dict(
        first_pass_correct=0,
        first_pass_total=0,
        wrong_checked=0,
        wrong_accepted=0,
        correct_checked=0,
        correct_rejected=0,
    )
    excluded = 0
    for trace in traces:
        if trace.task.gold_sql is None:
            excluded += 1
            continue
        try:
            per_iteration = [
                cache.score(record.generated_sql, trace.task.gold_sql, trace.task.db_id)
                for record in trace.iterations
            ]
        except (GoldExecutionError, DatabaseUnavailable):
            excluded += 1
            continue
        counts["first_pass_total"] += 1
        counts["first_pass_correct"] += per_iteration[0]
        for record, is_correct in zip(trace.iterations, per_iteration):
            if not record.verdicts:
                continue
            accepted = record.overall_accepted
            if is_correct:
                counts["correct_checked"] += 1
                counts["correct_rejected"] += not accepted
            else:
                counts["wrong_checked"] += 1
                counts["wrong_accepted"] += accepted

    def ratio(num: int, den: int) -> float | None:
        return num / den if den else None

    return PQSEstimate(
        p_hat=ratio(counts["first_pass_correct"], counts["first_pass_total"]),
        q_hat=ratio(counts["wrong_accepted"], counts["wrong_checked"]),
        s_hat=ratio(counts["correct_rejected"], counts["correct_checked"]),
        counts=PQSCounts(**counts),
        n_excluded=excluded,
    )


# ---------------------------------------------------------------------------
# Batch running and ablation
# ---------------------------------------------------------------------------

ActorFactory = Callable[[SpiderTask], Actor]
CriticFactory = Callable[[SpiderTask], Critic | None]


@dataclass
class RunSummary:
    written: int = 0
    resumed: int = 0
    failed: list[tuple[str, str]] = field(default_factory=list)


def run_tasks(
    tasks: Sequence[SpiderTask],
    schemas: SchemaIndex,
    actor_factory: ActorFactory,
    critic_factory: CriticFactory,
    config: ACConfig,
    out_path: str | Path,
    concurrency: int = 4,
    resume: bool = True,
) -> RunSummary:
    """Run the loop over tasks, appending traces as JSON Lines.

    Tasks whose task_id already appears in out_path are skipped so an
    interrupted run can be re-issued with the same command. Actor or
    database failures are recorded per task and do not abort the batch.
    """
    out_path = Path(out_path)
    summary = RunSummary()
    done: set[str] = set()
    if resume and out_path.exists():
        done = {t.task.task_id for t in read_traces(out_path)}
    pending = [t for t in tasks if t.task_id not in done]
    summary.resumed = len(tasks) - len(pending)

    write_lock = threading.Lock()

    def run_one(task: SpiderTask) -> ACTrace:
        ddl = schema_to_ddl(schemas, task.db_id)
        critic = None if config.critic_mode == "none" else critic_factory(task)
        return run_ac_loop(actor_factory(task), critic, task, config, ddl)

    mode = "a" if (resume and out_path.exists()) else "w"
    with open(out_path, mode, encoding="utf-8") as out:
        with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
            futures = {pool.submit(run_one, task): task for task in pending}
            for future in as_completed(futures):
                task = futures[future]
                try:
                    trace = future.result()
                except (ActorError, DatabaseUnavailable, KeyError) as exc:
                    summary.failed.append((task.task_id, str(exc)))
                    continue
                with write_lock:
                    write_trace(trace, out)
                    out.flush()
                    summary.written += 1
    return summary


def run_ablation(
    tasks: Sequence[SpiderTask],
    schemas: SchemaIndex,
    db_dir: str | Path,
    actor_factory: ActorFactory,
    critic_factory_for_mode: Callable[[str, SpiderTask], Critic | None],
    modes: Sequence[str],
    max_iterations: int,
    out_dir: str | Path,
    dataset_name: str = "",
    concurrency: int = 4,
    score_timeout: float = 30.0,
) -> list[EvalReport]:
    """Run one pass per critic mode over the same tasks and score each.

    Per-mode traces land in <out_dir>/traces_<mode>.jsonl. When "none"
    is among the modes, its EX becomes the baseline for the other rows.
    Report order follows the requested mode order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ex_by_mode: dict[str, float] = {}
    raw: list[tuple[str, EvalReport]] = []
    for mode in modes:
        out_path = out_dir / f"traces_{mode}.jsonl"
        config = ACConfig(max_iterations=max_iterations, critic_mode=mode)
        run_tasks(
            tasks,
            schemas,
            actor_factory,
            lambda task, _mode=mode: critic_factory_for_mode(_mode, task),
            config,
            out_path,
            concurrency=concurrency,
        )
        report = evaluate_run(
            read_traces(out_path), db_dir, dataset_name=dataset_name, timeout=score_timeout
        )
        ex_by_mode[mode] = report.ex
        raw.append((mode, report))

    baseline = ex_by_mode.get("none")
    reports = []
    for mode, report in raw:
        if baseline is not None and mode != "none":
            report = EvalReport(
                dataset_name=report.dataset_name,
                mode=report.mode,
                n_tasks=report.n_tasks,
                ex=report.ex,
                n_excluded=report.n_excluded,
                baseline_ex=baseline,
            )
        reports.append(report)
    return reports
