"""Concrete syntax tree representation shared by all grammars.

The tree keeps every lexical token (braces, semicolons, operators) as a
leaf, unlike an AST. Interior nodes carry grammar node-type names; leaf
nodes additionally carry the surface text of the token. Anonymous leaves
(keywords, operators, punctuation) use their literal text as their type,
which is the convention of mainstream parser toolkits.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class CSTNode:
    """One node of a concrete syntax tree."""

    type: str
    children: list["CSTNode"] = field(default_factory=list)
    text: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.text is not None

    @property
    def is_error(self) -> bool:
        return self.type == "ERROR"

    def leaves(self) -> list["CSTNode"]:
        """All leaves in left-to-right order (iterative walk)."""
        out: list[CSTNode] = []
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def walk(self):
        """Preorder traversal yielding every node."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def has_error(self) -> bool:
        return any(n.is_error for n in self.walk())

    def sexpr(self) -> str:
        """S-expression dump, useful in tests and the extract CLI."""
        if self.is_leaf:
            if self.type == self.text:
                return f'"{self.text}"'
            return f"({self.type} {self.text!r})"
        inner = " ".join(c.sexpr() for c in self.children)
        return f"({self.type} {inner})" if inner else f"({self.type})"


def leaf(type_: str, text: str) -> CSTNode:
    return CSTNode(type=type_, text=text)


def anon(text: str) -> CSTNode:
    """Anonymous leaf whose node type is its literal text."""
    return CSTNode(type=text, text=text)
