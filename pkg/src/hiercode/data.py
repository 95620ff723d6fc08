"""JSONL dataset loading and synthetic corpus generation.

Records are one JSON object per line. Structural problems (bad JSON,
missing fields, bad split names) raise MalformedRecord with the line
number; code that fails to parse is counted and skipped. Records may
pin their split with a "split" field; otherwise a seeded per-record
hash assigns 70/15/15 train/valid/test, so duplicated code always
lands in the same split.

Synthetic tasks:
  classify-hier   four categories whose programs share an identical
                  token sequence and differ only in statement nesting
                  (indentation is invisible to the token stream)
  classify-token  four categories with identical tree structure and
                  category-specific identifiers
  scope           nested-block programs for scope pair sampling
  namegen         method-name pairs whose distinctive subtoken appears
                  only in the body, reachable only by copying
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .errors import EmptyProgram, MalformedRecord, MissingFile
from .syntax import TokenizedProgram, extract_token_paths, parse_to_cst
from .syntax.paths import digest_source

TASKS = ("classify", "clone", "namegen", "scope")
SYNTH_TASKS = ("classify-hier", "classify-token", "scope", "namegen")
SPLITS = ("train", "valid", "test")
MASK_NAME_TOKEN = "<name>"


@dataclass
class Example:
    program: TokenizedProgram
    label: int | None = None  # classify / clone group index
    name: str | None = None  # namegen target


@dataclass
class LoadedDataset:
    task: str
    train: list[Example]
    valid: list[Example]
    test: list[Example]
    skipped: int
    label_names: list

    def split(self, name: str) -> list[Example]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def all_examples(self) -> list[Example]:
        return self.train + self.valid + self.test


def assign_split(code: str, seed: int) -> str:
    """Deterministic 70/15/15 assignment from a seeded content hash."""
    digest = hashlib.sha256(f"{seed}\x1f{code}".encode("utf-8")).digest()
    fraction = int.from_bytes(digest[:8], "big") / 2**64
    if fraction < 0.70:
        return "train"
    if fraction < 0.85:
        return "valid"
    return "test"


def mask_method_name(program: TokenizedProgram, name: str) -> TokenizedProgram:
    """Replace every occurrence of the defined name with the mask token."""
    tokens = [MASK_NAME_TOKEN if t == name else t for t in program.tokens]
    return replace(program, tokens=tokens)


def _parse_record(line: str, line_number: int) -> dict:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as err:
        raise MalformedRecord(f"invalid JSON: {err.msg}", line_number=line_number)
    if not isinstance(record, dict):
        raise MalformedRecord(
            f"expected a JSON object, got {type(record).__name__}",
            line_number=line_number,
        )
    return record


def _require_code(record: dict, line_number: int) -> str:
    code = record.get("code")
    if not isinstance(code, str):
        raise MalformedRecord(
            'missing or non-string "code" field', line_number=line_number
        )
    return code


def load_dataset(
    path: str | Path,
    task: str,
    *,
    seed: int = 0,
    language: str = "python",
) -> LoadedDataset:
    """Read a JSONL task file into parsed, split examples.

    classify/clone records need {"code", "label"}; namegen records need
    {"code", "name"} and have the defined name masked out of the source
    tokens; scope records need only {"code"}. A per-record "language"
    or "split" field overrides the defaults.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; choose from {TASKS}")
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"no dataset at {path}")

    rows: list[tuple[Example, str]] = []
    raw_labels: list = []
    skipped = 0
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = _parse_record(line, line_number)
            code = _require_code(record, line_number)

            label_value = None
            name = None
            if task in ("classify", "clone"):
                if "label" not in record or isinstance(record["label"], (dict, list)):
                    raise MalformedRecord(
                        'missing or invalid "label" field', line_number=line_number
                    )
                label_value = record["label"]
            elif task == "namegen":
                name = record.get("name")
                if not isinstance(name, str) or not name:
                    raise MalformedRecord(
                        'missing or empty "name" field', line_number=line_number
                    )

            split = record.get("split")
            if split is not None and split not in SPLITS:
                raise MalformedRecord(
                    f'"split" must be one of {SPLITS}, got {split!r}',
                    line_number=line_number,
                )
            lang = record.get("language", language)

            tree = parse_to_cst(code, lang)
            if tree.type == "ERROR":
                skipped += 1
                continue
            try:
                program = extract_token_paths(
                    tree, lang, source_digest=digest_source(code)
                )
            except EmptyProgram:
                skipped += 1
                continue
            if task == "namegen":
                program = mask_method_name(program, name)
            example = Example(program=program, label=label_value, name=name)
            rows.append((example, split or assign_split(code, seed)))
            if label_value is not None:
                raw_labels.append(label_value)

    label_names: list = []
    if task in ("classify", "clone"):
        try:
            label_names = sorted(set(raw_labels))
        except TypeError:
            raise MalformedRecord("labels mix incomparable types")
        index = {value: i for i, value in enumerate(label_names)}
        for example, _ in rows:
            example.label = index[example.label]

    dataset = LoadedDataset(
        task=task, train=[], valid=[], test=[], skipped=skipped, label_names=label_names
    )
    for example, split in rows:
        dataset.split(split).append(example)
    return dataset


def write_jsonl(records: Iterable[dict], path: str | Path) -> int:
    """Serialize records one JSON object per line; returns the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
            n += 1
    return n


# --- synthetic corpora -------------------------------------------------

_LOOP_VARS = ("i", "j", "k", "n", "m")
_SEQ_NAMES = ("xs", "items", "vals", "data", "rows")
_COND_NAMES = ("flag", "ok", "ready", "cond", "alive")
_ACC_NAMES = ("acc", "total", "out", "sum1", "res")
_TRAILER_NAMES = ("t", "u", "w", "z", "q")
_VERBS = ("get", "set", "make", "find", "count", "read", "write", "build")
_CAT_TOKEN_POOLS = (
    ("alpha", "north", "red", "iron"),
    ("beta", "south", "green", "zinc"),
    ("gamma", "east", "blue", "lead"),
    ("delta", "west", "gray", "tin"),
)


def _hier_pack(rng: random.Random) -> dict:
    return {
        "i": rng.choice(_LOOP_VARS),
        "xs": rng.choice(_SEQ_NAMES),
        "c": rng.choice(_COND_NAMES),
        "d": rng.choice(_COND_NAMES) + "2",
        "acc": rng.choice(_ACC_NAMES),
        "t": rng.choice(_TRAILER_NAMES),
        "k": str(rng.randint(1, 9)),
        "n": str(rng.randint(10, 99)),
    }


def _hier_program(pack: dict, category: int) -> str:
    """One of four nestings of the same token sequence.

    The trailer statement sits at indentation depth 3 - category below
    the common for/if/if skeleton, so all categories emit exactly the
    same tokens in the same order; only the CST differs.
    """
    p = pack
    skeleton = (
        f"for {p['i']} in {p['xs']}:\n"
        f"    if {p['c']}:\n"
        f"        if {p['d']}:\n"
        f"            {p['acc']} = {p['acc']} + {p['k']}\n"
    )
    trailer_indent = "    " * (3 - category)
    return skeleton + f"{trailer_indent}{p['t']} = {p['n']}\n"


def _token_program(rng: random.Random, category: int) -> str:
    """Fixed tree shape; the called name identifies the category."""
    marker = rng.choice(_CAT_TOKEN_POOLS[category])
    arg = rng.choice(_SEQ_NAMES)
    out = rng.choice(_ACC_NAMES)
    return f"def run({arg}):\n    {out} = {marker}({arg})\n    return {out}\n"


def _scope_program(rng: random.Random) -> str:
    """Nested blocks with assignments spread across scopes."""
    a, b, c_var = rng.sample(list(_ACC_NAMES), 3)
    cond = rng.choice(_COND_NAMES)
    loop = rng.choice(_LOOP_VARS)
    seq = rng.choice(_SEQ_NAMES)
    lines = [
        f"{a} = {rng.randint(0, 9)}",
        f"{cond} = {a}",
        f"if {cond}:",
        f"    {b} = {a} + 1",
        f"    {c_var} = {b}",
        f"for {loop} in {seq}:",
        f"    {a} = {a} + {loop}",
    ]
    if rng.random() < 0.5:
        lines.extend([f"while {cond}:", f"    {b} = {b} - 1"])
    return "\n".join(lines) + "\n"


def _random_noun(rng: random.Random) -> str:
    consonants = "bcdfgklmnpqrstvz"
    vowels = "aeiou"
    length = rng.randint(2, 3)
    word = ""
    for _ in range(length):
        word += rng.choice(consonants) + rng.choice(vowels)
    return word + rng.choice(consonants)


def _namegen_record(rng: random.Random) -> dict:
    verb = rng.choice(_VERBS)
    noun = _random_noun(rng)
    name = f"{verb}_{noun}"
    helper = rng.choice(_ACC_NAMES)
    template = rng.randrange(3)
    if template == 0:
        code = (
            f"def {name}():\n"
            f"    {helper} = {noun}\n"
            f"    return {helper}\n"
        )
    elif template == 1:
        code = (
            f"def {name}({noun}):\n"
            f"    {helper} = {noun} + 1\n"
            f"    return {helper}\n"
        )
    else:
        code = (
            f"def {name}():\n"
            f"    return {noun}\n"
        )
    return {"code": code, "name": name}


def generate_synthetic(task: str, size: int, seed: int) -> list[dict]:
    """Deterministic synthetic records for one task.

    classify-hier groups records in blocks of four: records 4j..4j+3
    share one content pack and are labeled 0..3, so each block carries
    four programs with byte-identical token sequences under different
    nestings.
    """
    if task not in SYNTH_TASKS:
        raise ValueError(f"unknown synthetic task {task!r}; choose from {SYNTH_TASKS}")
    if size < 0:
        raise ValueError(f"size must be >= 0, got {size}")
    rng = random.Random(seed)
    records: list[dict] = []
    if task == "classify-hier":
        for j in range(size):
            if j % 4 == 0:
                pack = _hier_pack(rng)
            category = j % 4
            records.append({"code": _hier_program(pack, category), "label": category})
    elif task == "classify-token":
        for j in range(size):
            category = j % 4
            records.append({"code": _token_program(rng, category), "label": category})
    elif task == "scope":
        for _ in range(size):
            records.append({"code": _scope_program(rng)})
    else:  # namegen
        for _ in range(size):
            records.append(_namegen_record(rng))
    return records
