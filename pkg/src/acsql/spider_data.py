"""Loading Spider-format benchmarks and serializing schemas to prompt DDL.

Inputs are Spider's on-disk conventions: a JSON array of tasks with
question/db_id/query fields, a tables.json describing every database
schema, and one SQLite file per database at <db_dir>/<db_id>/<db_id>.sqlite.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path


class DatasetFormatError(Exception):
    """The tasks or tables file is not in the expected Spider format."""


@dataclass(frozen=True)
class SpiderTask:
    task_id: str
    db_id: str
    question: str
    gold_sql: str | None = None


@dataclass(frozen=True)
class TableSchema:
    table_name: str
    columns: tuple[tuple[str, str], ...]  # (name, declared type) in dataset order
    primary_keys: tuple[str, ...] = ()
    foreign_keys: tuple[tuple[str, str, str], ...] = ()  # (local, foreign table, foreign col)


SchemaIndex = dict[str, tuple[TableSchema, ...]]

# Spider declares abstract column types; prompts use concrete SQL surface
# types (INT/TEXT being the common case).
_TYPE_SURFACE = {
    "text": "TEXT",
    "number": "INT",
    "time": "TIME",
    "boolean": "BOOLEAN",
}


@dataclass
class LoadedDataset:
    tasks: list[SpiderTask]
    schemas: SchemaIndex
    db_dir: Path
    unloadable: list[tuple[str, str]] = field(default_factory=list)  # (task_id, reason)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def load_report(self) -> str:
        lines = [
            f"tasks loaded: {len(self.tasks)}",
            f"tasks unloadable: {len(self.unloadable)}",
            f"databases indexed: {len(self.schemas)}",
        ]
        lines.extend(f"  {task_id}: {reason}" for task_id, reason in self.unloadable)
        return "\n".join(lines)


def database_path(db_dir: str | Path, db_id: str) -> Path:
    return Path(db_dir) / db_id / f"{db_id}.sqlite"


def _read_json(path: str | Path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as exc:
        raise DatasetFormatError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DatasetFormatError(f"malformed JSON in {path}: {exc}") from exc


def parse_tables_json(path: str | Path) -> SchemaIndex:
    """Build the schema index from Spider's tables.json."""
    raw = _read_json(path)
    if not isinstance(raw, list):
        raise DatasetFormatError(f"{path}: expected a JSON array of database entries")
    index: SchemaIndex = {}
    for entry in raw:
        db_id = entry["db_id"]
        table_names = entry["table_names_original"]
        column_pairs = entry["column_names_original"]
        column_types = entry["column_types"]
        primary_keys = set(entry.get("primary_keys", []))
        foreign_keys = entry.get("foreign_keys", [])

        columns_by_table: list[list[tuple[str, str]]] = [[] for _ in table_names]
        pk_by_table: list[list[str]] = [[] for _ in table_names]
        fk_by_table: list[list[tuple[str, str, str]]] = [[] for _ in table_names]

        for col_idx, (table_idx, col_name) in enumerate(column_pairs):
            if table_idx < 0:  # the "*" pseudo-column
                continue
            declared = column_types[col_idx] if col_idx < len(column_types) else "text"
            surface = _TYPE_SURFACE.get(str(declared).lower(), "TEXT")
            columns_by_table[table_idx].append((col_name, surface))
            if col_idx in primary_keys:
                pk_by_table[table_idx].append(col_name)

        for local_idx, foreign_idx in foreign_keys:
            for idx in (local_idx, foreign_idx):
                if not 0 <= idx < len(column_pairs) or column_pairs[idx][0] < 0:
                    raise DatasetFormatError(
                        f"{db_id}: foreign key references column index {idx} "
                        "outside the schema"
                    )
            local_table, local_col = column_pairs[local_idx]
            foreign_table, foreign_col = column_pairs[foreign_idx]
            fk_by_table[local_table].append(
                (local_col, table_names[foreign_table], foreign_col)
            )

        index[db_id] = tuple(
            TableSchema(
                table_name=name,
                columns=tuple(columns_by_table[i]),
                primary_keys=tuple(pk_by_table[i]),
                foreign_keys=tuple(fk_by_table[i]),
            )
            for i, name in enumerate(table_names)
        )
    return index


def schema_to_ddl(schemas: SchemaIndex, db_id: str) -> str:
    """Serialize one database schema to prompt DDL, deterministically.

    One CREATE TABLE statement per table in dataset order, columns
    followed by PRIMARY KEY and FOREIGN KEY clauses.
    """
    if db_id not in schemas:
        raise KeyError(f"unknown db_id {db_id!r}")
    statements = []
    for table in schemas[db_id]:
        parts = [f"{name} {decl}" for name, decl in table.columns]
        if table.primary_keys:
            parts.append(f"PRIMARY KEY ( {', '.join(table.primary_keys)} )")
        for local, foreign_table, foreign_col in table.foreign_keys:
            parts.append(
                f"FOREIGN KEY ( {local} ) REFERENCES {foreign_table} ({foreign_col})"
            )
        statements.append(f"CREATE TABLE {table.table_name} ( {', '.join(parts)} );")
    return "\n\n".join(statements)


def load_dataset(
    tasks_path: str | Path, tables_path: str | Path, db_dir: str | Path
) -> LoadedDataset:
    """Load tasks and schemas, flagging tasks whose database is missing."""
    raw_tasks = _read_json(tasks_path)
    if not isinstance(raw_tasks, list):
        raise DatasetFormatError(f"{tasks_path}: expected a JSON array of tasks")
    schemas = parse_tables_json(tables_path)
    db_dir = Path(db_dir)

    tasks: list[SpiderTask] = []
    unloadable: list[tuple[str, str]] = []
    for i, entry in enumerate(raw_tasks):
        try:
            task = SpiderTask(
                task_id=f"t{i:05d}",
                db_id=entry["db_id"],
                question=entry["question"],
                gold_sql=entry.get("query"),
            )
        except (TypeError, KeyError) as exc:
            raise DatasetFormatError(
                f"{tasks_path}: task {i} missing required field: {exc}"
            ) from exc
        db_file = database_path(db_dir, task.db_id)
        if task.db_id not in schemas:
            unloadable.append((task.task_id, f"db_id {task.db_id!r} not in tables file"))
        elif not db_file.is_file():
            unloadable.append((task.task_id, f"database file missing: {db_file}"))
        else:
            tasks.append(task)
    return LoadedDataset(tasks=tasks, schemas=schemas, db_dir=db_dir, unloadable=unloadable)
