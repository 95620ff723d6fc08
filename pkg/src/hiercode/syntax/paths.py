"""Per-token hierarchy paths: extraction, splitting, projection.

A hierarchy path lists node-type names from the tree root down to and
including a leaf's own type. Its statement split index s divides the
path into a global part nodes[0..s] (root to enclosing statement,
inclusive) and a local part nodes[s+1..] (statement children down to
the leaf). Splitting uses the grammar's configured statement set and
picks the DEEPEST statement ancestor, so a path through nested
statements belongs to the innermost one.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from ..errors import EmptyProgram
from .parse import get_grammar, parse_to_cst
from .tree import CSTNode

PAD_TYPE = "<pad>"
UNK_TYPE = "<unk>"

DEFAULT_SKIP_TYPES = frozenset({"comment"})

HIERARCHY_MODES = ("full", "global", "local", "none")


@dataclass
class HierarchyPath:
    """Root-to-leaf node-type names plus the global/local split index."""

    nodes: list[str]
    statement_split: int = -1

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("hierarchy path must be non-empty")
        if not -1 <= self.statement_split < len(self.nodes):
            raise ValueError(
                f"statement_split {self.statement_split} out of range "
                f"for path of length {len(self.nodes)}"
            )

    @property
    def global_part(self) -> list[str]:
        return self.nodes[: self.statement_split + 1] if self.statement_split >= 0 else list(self.nodes)

    @property
    def local_part(self) -> list[str]:
        return self.nodes[self.statement_split + 1 :] if self.statement_split >= 0 else []


@dataclass
class TokenizedProgram:
    """One program's surface tokens aligned with their hierarchy paths.

    block_ids is auxiliary scope information (preorder index of each
    token's nearest enclosing block-type ancestor). It rides along for
    scope-pair sampling and is not part of the serialized record.
    """

    tokens: list[str]
    paths: list[HierarchyPath]
    language: str
    source_digest: str
    block_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.tokens) != len(self.paths):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.paths)} paths"
            )

    def __len__(self) -> int:
        return len(self.tokens)


def digest_source(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()[:16]


def split_path(path: HierarchyPath, statement_set: frozenset[str] | set[str]) -> HierarchyPath:
    """Set statement_split to the deepest statement-type node, or -1."""
    split = -1
    for i, name in enumerate(path.nodes):
        if name in statement_set:
            split = i
    return replace(path, nodes=list(path.nodes), statement_split=split)


def truncate_path(nodes: Sequence[str], split: int, max_depth: int) -> tuple[list[str], int]:
    """Cap a path at max_depth nodes.

    Drops interior global nodes nearest the root first, then the head of
    the local part, always keeping the root, the statement node (when
    present), and the path's final elements down to the leaf type.
    """
    if max_depth < 3:
        raise ValueError(f"max_depth must be >= 3, got {max_depth}")
    excess = len(nodes) - max_depth
    if excess <= 0:
        return list(nodes), split
    if split >= 1:
        drop_g = min(excess, split - 1)
        head = [nodes[0], *nodes[1 + drop_g : split + 1]]
        rest = excess - drop_g
        tail = list(nodes[split + 1 + rest :])
        return head + tail, split - drop_g
    return [nodes[0], *nodes[1 + excess :]], split


def extract_token_paths(
    tree: CSTNode,
    language: str,
    *,
    max_path_depth: int = 32,
    skip_types: frozenset[str] = DEFAULT_SKIP_TYPES,
    source_digest: str | None = None,
) -> TokenizedProgram:
    """Walk the tree and build one split, depth-capped path per leaf.

    Leaves whose type is in skip_types (comments by default) are
    excluded. Raises EmptyProgram when nothing remains.
    """
    grammar = get_grammar(language)
    tokens: list[str] = []
    paths: list[HierarchyPath] = []
    block_ids: list[int] = []

    # Preorder walk carrying the ancestor type chain and the preorder
    # index of the nearest block-type ancestor (-1: none).
    stack: list[tuple[CSTNode, tuple[str, ...], int]] = [(tree, (), -1)]
    preorder = 0
    while stack:
        node, ancestors, block_id = stack.pop()
        index = preorder
        preorder += 1
        if node.is_leaf:
            if node.type in skip_types:
                continue
            nodes = [*ancestors, node.type]
            split = -1
            for i, name in enumerate(nodes):
                if name in grammar.statements:
                    split = i
            nodes, split = truncate_path(nodes, split, max_path_depth)
            tokens.append(node.text or "")
            paths.append(HierarchyPath(nodes, split))
            block_ids.append(block_id)
            continue
        child_block = index if node.type in grammar.blocks else block_id
        child_ancestors = ancestors + (node.type,)
        for child in reversed(node.children):
            stack.append((child, child_ancestors, child_block))

    if not tokens:
        raise EmptyProgram(f"no tokens extracted ({language})")
    if source_digest is None:
        source_digest = digest_source(chr(0).join(tokens))
    return TokenizedProgram(
        tokens=tokens,
        paths=paths,
        language=language,
        source_digest=source_digest,
        block_ids=block_ids,
    )


def tokenize_program(source: str | bytes, language: str, **kwargs) -> TokenizedProgram:
    """Parse then extract in one call, hashing the original source."""
    tree = parse_to_cst(source, language)
    text = source.decode("utf-8") if isinstance(source, bytes) else source
    kwargs.setdefault("source_digest", digest_source(text))
    return extract_token_paths(tree, language, **kwargs)


def project_hierarchy(program: TokenizedProgram, mode: str) -> TokenizedProgram:
    """Apply the hierarchy ablation: full | global | local | none."""
    if mode not in HIERARCHY_MODES:
        raise ValueError(f"unknown hierarchy mode {mode!r}; choose from {HIERARCHY_MODES}")
    if mode == "full":
        return program
    new_paths: list[HierarchyPath] = []
    for path in program.paths:
        s = path.statement_split
        if mode == "global":
            if s < 0:
                new_paths.append(HierarchyPath(list(path.nodes), -1))
            else:
                new_paths.append(HierarchyPath(path.nodes[: s + 1], s))
        elif mode == "local":
            local = path.nodes[s + 1 :] if s >= 0 else []
            new_paths.append(HierarchyPath(local or [UNK_TYPE], -1))
        else:  # none: hierarchy signal removed entirely
            new_paths.append(HierarchyPath([PAD_TYPE], -1))
    return replace(program, paths=new_paths)


class NodeTypeVocabulary:
    """Bijective node-type-name ↔ id interning with reserved PAD/UNK."""

    PAD = 0
    UNK_NODE = 1

    def __init__(self, names: Iterable[str] = ()):
        reserved = [PAD_TYPE, UNK_TYPE]
        seen = sorted(set(names) - set(reserved))
        self._names: list[str] = reserved + seen
        self._ids: dict[str, int] = {n: i for i, n in enumerate(self._names)}

    @classmethod
    def from_programs(cls, programs: Iterable[TokenizedProgram]) -> "NodeTypeVocabulary":
        names: set[str] = set()
        for program in programs:
            for path in program.paths:
                names.update(path.nodes)
        return cls(names)

    def intern(self, name: str) -> int:
        return self._ids.get(name, self.UNK_NODE)

    def name_of(self, idx: int) -> str:
        return self._names[idx]

    def encode(self, names: Sequence[str]) -> list[int]:
        return [self.intern(n) for n in names]

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def to_list(self) -> list[str]:
        return list(self._names)

    @classmethod
    def from_list(cls, names: list[str]) -> "NodeTypeVocabulary":
        if names[:2] != [PAD_TYPE, UNK_TYPE]:
            raise ValueError("node-type vocabulary list must start with reserved names")
        vocab = cls()
        vocab._names = list(names)
        vocab._ids = {n: i for i, n in enumerate(names)}
        return vocab


def program_to_record(program: TokenizedProgram) -> dict:
    """Portable JSON form: node types by name, split indices aligned."""
    return {
        "tokens": list(program.tokens),
        "paths": [list(p.nodes) for p in program.paths],
        "splits": [p.statement_split for p in program.paths],
        "language": program.language,
    }


def program_from_record(record: dict) -> TokenizedProgram:
    paths = [
        HierarchyPath(list(nodes), split)
        for nodes, split in zip(record["paths"], record["splits"])
    ]
    tokens = list(record["tokens"])
    return TokenizedProgram(
        tokens=tokens,
        paths=paths,
        language=record["language"],
        source_digest=digest_source(chr(0).join(tokens)),
    )
