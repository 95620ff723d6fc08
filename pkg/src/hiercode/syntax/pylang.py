"""Recursive-descent CST parser for an indentation-based Python grammar.

Covers the statement and expression forms that appear in real-world
snippets at small scale: function definitions, if/elif/else, for, while,
assignments (plain, augmented, chained), calls, attribute/subscript
access, boolean/comparison/arithmetic operators, literals, imports, and
pass/break/continue/return. Anything outside the subset is absorbed into
an ERROR node at statement granularity, so a malformed input still yields
a usable tree.

Node-type names follow the common grammar convention for this language:
module, function_definition, block, expression_statement, assignment,
identifier, integer, and so on.
"""

from __future__ import annotations

from .tree import CSTNode, anon, leaf

KEYWORDS = {
    "def", "if", "elif", "else", "for", "while", "return", "in", "not",
    "and", "or", "pass", "break", "continue", "import", "from", "as",
    "is", "None", "True", "False", "lambda", "with", "try", "except",
    "finally", "raise", "class", "global", "del", "assert", "yield",
}

# Multi-character operators first so maximal munch works.
_OPERATORS = [
    "**=", "//=", "<<=", ">>=",
    "==", "!=", "<=", ">=", "->", "+=", "-=", "*=", "/=", "%=", "**",
    "//", "<<", ">>", "&=", "|=", "^=", ":=",
    "+", "-", "*", "/", "%", "<", ">", "=", "(", ")", "[", "]", "{", "}",
    ",", ":", ".", ";", "@", "&", "|", "^", "~",
]

_AUGMENTED_OPS = {"+=", "-=", "*=", "/=", "//=", "%=", "**=", "<<=", ">>=", "&=", "|=", "^="}

_COMPARE_OPS = {"<", ">", "==", "!=", "<=", ">="}


class Token:
    __slots__ = ("kind", "value")

    def __init__(self, kind: str, value: str = ""):
        self.kind = kind  # NAME KEYWORD INT FLOAT STRING OP COMMENT NEWLINE INDENT DEDENT EOF
        self.value = value

    def __repr__(self):
        return f"Token({self.kind}, {self.value!r})"


class _ParseFailure(Exception):
    pass


def tokenize(source: str) -> list[Token]:
    """Lex source into tokens with synthetic INDENT/DEDENT/NEWLINE."""
    tokens: list[Token] = []
    indents = [0]
    depth = 0  # bracket nesting; newlines inside brackets are soft
    i = 0
    n = len(source)
    at_line_start = True
    line_had_code = False

    def end_line():
        nonlocal line_had_code, at_line_start
        if line_had_code:
            # Keep a trailing comment after the logical-line break so the
            # parser only ever sees comments at statement boundaries.
            if tokens and tokens[-1].kind == "COMMENT":
                comment = tokens.pop()
                tokens.append(Token("NEWLINE"))
                tokens.append(comment)
            else:
                tokens.append(Token("NEWLINE"))
        line_had_code = False
        at_line_start = True

    while i < n:
        ch = source[i]

        if at_line_start and depth == 0:
            # Measure indentation; tabs round up to a multiple of 8.
            col = 0
            j = i
            while j < n and source[j] in " \t":
                col = col + 1 if source[j] == " " else (col // 8 + 1) * 8
                j += 1
            if j >= n or source[j] in "\r\n":
                i = j + 1 if j < n else j
                continue  # blank line
            if source[j] == "#":
                # Comment-only line: no indent bookkeeping.
                k = j
                while k < n and source[k] not in "\r\n":
                    k += 1
                tokens.append(Token("COMMENT", source[j:k]))
                i = k
                continue
            if col > indents[-1]:
                indents.append(col)
                tokens.append(Token("INDENT"))
            else:
                while col < indents[-1]:
                    indents.pop()
                    tokens.append(Token("DEDENT"))
                if col != indents[-1]:
                    # Inconsistent dedent; accept it rather than fail.
                    indents.append(col)
            i = j
            at_line_start = False
            continue

        if ch in "\r\n":
            i += 1
            if ch == "\r" and i < n and source[i] == "\n":
                i += 1
            if depth == 0:
                end_line()
            continue

        if ch in " \t":
            i += 1
            continue

        if ch == "\\" and i + 1 < n and source[i + 1] in "\r\n":
            i += 2
            if source[i - 1] == "\r" and i < n and source[i] == "\n":
                i += 1
            continue

        if ch == "#":
            k = i
            while k < n and source[k] not in "\r\n":
                k += 1
            tokens.append(Token("COMMENT", source[i:k]))
            i = k
            continue

        line_had_code = True

        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            is_float = False
            while j < n and (source[j].isalnum() or source[j] in "._"):
                if source[j] in "eE" and j + 1 < n and source[j + 1] in "+-":
                    is_float = True
                    j += 2
                    continue
                if source[j] == ".":
                    is_float = True
                j += 1
            text = source[i:j]
            if "e" in text.lower() and not text.lower().startswith("0x"):
                is_float = True
            tokens.append(Token("FLOAT" if is_float else "INT", text))
            i = j
            continue

        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            # String prefix (r, b, f, u combinations) directly before a quote.
            if j < n and source[j] in "'\"" and word.lower().strip("rbfu") == "":
                s, j2 = _lex_string(source, i, j)
                tokens.append(Token("STRING", s))
                i = j2
                continue
            kind = "KEYWORD" if word in KEYWORDS else "NAME"
            tokens.append(Token(kind, word))
            i = j
            continue

        if ch in "'\"":
            s, j = _lex_string(source, i, i)
            tokens.append(Token("STRING", s))
            i = j
            continue

        for op in _OPERATORS:
            if source.startswith(op, i):
                if op in "([{":
                    depth += 1
                elif op in ")]}":
                    depth = max(0, depth - 1)
                tokens.append(Token("OP", op))
                i += len(op)
                break
        else:
            # Unknown character: surface it as an operator-like token and
            # let statement-level recovery deal with it.
            tokens.append(Token("OP", ch))
            i += 1

    if line_had_code:
        end_line()
    while len(indents) > 1:
        indents.pop()
        tokens.append(Token("DEDENT"))
    tokens.append(Token("EOF"))
    return tokens


def _lex_string(source: str, start: int, quote_pos: int) -> tuple[str, int]:
    n = len(source)
    q = source[quote_pos]
    if source.startswith(q * 3, quote_pos):
        closer = q * 3
        j = quote_pos + 3
        while j < n and not source.startswith(closer, j):
            j += 2 if source[j] == "\\" else 1
        j = min(n, j + 3)
        return source[start:j], j
    j = quote_pos + 1
    while j < n and source[j] != q and source[j] not in "\r\n":
        j += 2 if source[j] == "\\" else 1
    j = min(n, j + 1)
    return source[start:j], j


def _token_leaf(tok: Token) -> CSTNode:
    if tok.kind == "NAME":
        return leaf("identifier", tok.value)
    if tok.kind == "INT":
        return leaf("integer", tok.value)
    if tok.kind == "FLOAT":
        return leaf("float", tok.value)
    if tok.kind == "STRING":
        return leaf("string", tok.value)
    if tok.kind == "COMMENT":
        return leaf("comment", tok.value)
    if tok.kind == "KEYWORD" and tok.value in ("True", "False", "None"):
        return leaf(tok.value.lower(), tok.value)
    return anon(tok.value)


class PythonParser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token stream helpers -------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def advance(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    def expect(self, kind: str, value: str | None = None) -> Token:
        if not self.at(kind, value):
            raise _ParseFailure(f"expected {value or kind}, got {self.peek()!r}")
        return self.advance()

    # -- entry point ------------------------------------------------------

    def parse_module(self) -> CSTNode:
        module = CSTNode("module")
        self._parse_statement_list(module, until={"EOF"})
        return module

    def _parse_statement_list(self, parent: CSTNode, until: set[str]) -> None:
        while True:
            tok = self.peek()
            if tok.kind in until:
                return
            if tok.kind == "NEWLINE":
                self.advance()
                continue
            if tok.kind == "COMMENT":
                parent.children.append(_token_leaf(self.advance()))
                continue
            if tok.kind in ("INDENT", "DEDENT"):
                # Stray indentation (e.g. after recovery); skip it.
                self.advance()
                continue
            start = self.pos
            try:
                parent.children.append(self.parse_statement())
            except _ParseFailure:
                parent.children.append(self._recover(start))

    def _recover(self, start: int) -> CSTNode:
        """Panic-mode recovery: absorb the failed statement into ERROR."""
        self.pos = start
        err = CSTNode("ERROR")
        nesting = 0
        while True:
            tok = self.peek()
            if tok.kind == "EOF":
                break
            if tok.kind == "NEWLINE":
                self.advance()
                if nesting <= 0:
                    break
                continue
            if tok.kind == "INDENT":
                nesting += 1
                self.advance()
                continue
            if tok.kind == "DEDENT":
                nesting -= 1
                self.advance()
                if nesting <= 0:
                    break
                continue
            err.children.append(_token_leaf(self.advance()))
        if not err.children and self.pos == start:
            self.advance()  # guarantee forward progress
        return err

    # -- statements -------------------------------------------------------

    def parse_statement(self) -> CSTNode:
        tok = self.peek()
        if tok.kind == "KEYWORD":
            handler = {
                "if": self._if_statement,
                "for": self._for_statement,
                "while": self._while_statement,
                "def": self._function_definition,
                "return": self._return_statement,
                "pass": lambda: self._keyword_statement("pass_statement"),
                "break": lambda: self._keyword_statement("break_statement"),
                "continue": lambda: self._keyword_statement("continue_statement"),
                "import": self._import_statement,
                "from": self._import_from_statement,
            }.get(tok.value)
            if handler is not None:
                return handler()
            raise _ParseFailure(f"unsupported statement keyword {tok.value!r}")
        return self._simple_statement()

    def _end_simple(self) -> None:
        if self.at("NEWLINE"):
            self.advance()
        elif self.peek().kind not in ("EOF", "DEDENT") and not self.at("OP", ";"):
            raise _ParseFailure(f"trailing tokens: {self.peek()!r}")

    def _keyword_statement(self, type_: str) -> CSTNode:
        node = CSTNode(type_, [anon(self.advance().value)])
        self._end_simple()
        return node

    def _return_statement(self) -> CSTNode:
        node = CSTNode("return_statement", [anon(self.advance().value)])
        if not self.at("NEWLINE") and self.peek().kind not in ("EOF", "DEDENT"):
            node.children.append(self._expression_list())
        self._end_simple()
        return node

    def _import_statement(self) -> CSTNode:
        node = CSTNode("import_statement", [anon(self.advance().value)])
        node.children.append(self._dotted_name())
        while self.at("KEYWORD", "as") or self.at("OP", ","):
            node.children.append(anon(self.advance().value))
            node.children.append(self._dotted_name())
        self._end_simple()
        return node

    def _import_from_statement(self) -> CSTNode:
        node = CSTNode("import_from_statement", [anon(self.advance().value)])
        node.children.append(self._dotted_name())
        node.children.append(anon(self.expect("KEYWORD", "import").value))
        if self.at("OP", "*"):
            node.children.append(anon(self.advance().value))
        else:
            node.children.append(self._dotted_name())
            while self.at("KEYWORD", "as") or self.at("OP", ","):
                node.children.append(anon(self.advance().value))
                node.children.append(self._dotted_name())
        self._end_simple()
        return node

    def _dotted_name(self) -> CSTNode:
        first = self.expect("NAME")
        if not self.at("OP", "."):
            return leaf("identifier", first.value)
        node = CSTNode("dotted_name", [leaf("identifier", first.value)])
        while self.at("OP", "."):
            node.children.append(anon(self.advance().value))
            node.children.append(leaf("identifier", self.expect("NAME").value))
        return node

    def _simple_statement(self) -> CSTNode:
        expr = self._expression_list()
        if self.at("OP", "="):
            node = self._assignment_tail(expr)
        elif self.peek().kind == "OP" and self.peek().value in _AUGMENTED_OPS:
            op = anon(self.advance().value)
            node = CSTNode("augmented_assignment", [expr, op, self._expression_list()])
        else:
            node = expr
        self._end_simple()
        return CSTNode("expression_statement", [node])

    def _assignment_tail(self, left: CSTNode) -> CSTNode:
        eq = anon(self.expect("OP", "=").value)
        right = self._expression_list()
        if self.at("OP", "="):
            right = self._assignment_tail(right)
        return CSTNode("assignment", [left, eq, right])

    def _expression_list(self) -> CSTNode:
        first = self.parse_expression()
        if not self.at("OP", ","):
            return first
        node = CSTNode("expression_list", [first])
        while self.at("OP", ","):
            node.children.append(anon(self.advance().value))
            if self.at("NEWLINE") or self.at("OP", "="):
                break
            node.children.append(self.parse_expression())
        return node

    # -- compound statements ----------------------------------------------

    def _block(self) -> CSTNode:
        """Suite after ':': inline simple statements or an indented block."""
        block = CSTNode("block")
        if self.at("NEWLINE"):
            self.advance()
            while self.at("COMMENT"):
                block.children.append(_token_leaf(self.advance()))
                continue
            self.expect("INDENT")
            self._parse_statement_list(block, until={"DEDENT", "EOF"})
            if self.at("DEDENT"):
                self.advance()
        else:
            block.children.append(self.parse_statement())
            while self.at("OP", ";"):
                block.children.append(anon(self.advance().value))
                if self.at("NEWLINE") or self.peek().kind == "EOF":
                    break
                block.children.append(self.parse_statement())
            if self.at("NEWLINE"):
                self.advance()
        return block

    def _if_statement(self) -> CSTNode:
        node = CSTNode("if_statement", [anon(self.advance().value)])
        node.children.append(self.parse_expression())
        node.children.append(anon(self.expect("OP", ":").value))
        node.children.append(self._block())
        while self.at("KEYWORD", "elif"):
            clause = CSTNode("elif_clause", [anon(self.advance().value)])
            clause.children.append(self.parse_expression())
            clause.children.append(anon(self.expect("OP", ":").value))
            clause.children.append(self._block())
            node.children.append(clause)
        if self.at("KEYWORD", "else"):
            clause = CSTNode("else_clause", [anon(self.advance().value)])
            clause.children.append(anon(self.expect("OP", ":").value))
            clause.children.append(self._block())
            node.children.append(clause)
        return node

    def _for_statement(self) -> CSTNode:
        node = CSTNode("for_statement", [anon(self.advance().value)])
        node.children.append(self._target_list())
        node.children.append(anon(self.expect("KEYWORD", "in").value))
        node.children.append(self._expression_list())
        node.children.append(anon(self.expect("OP", ":").value))
        node.children.append(self._block())
        return node

    def _target_list(self) -> CSTNode:
        first = self._postfix_expression(self._atom())
        if not self.at("OP", ","):
            return first
        node = CSTNode("pattern_list", [first])
        while self.at("OP", ","):
            node.children.append(anon(self.advance().value))
            node.children.append(self._postfix_expression(self._atom()))
        return node

    def _while_statement(self) -> CSTNode:
        node = CSTNode("while_statement", [anon(self.advance().value)])
        node.children.append(self.parse_expression())
        node.children.append(anon(self.expect("OP", ":").value))
        node.children.append(self._block())
        return node

    def _function_definition(self) -> CSTNode:
        node = CSTNode("function_definition", [anon(self.advance().value)])
        node.children.append(leaf("identifier", self.expect("NAME").value))
        node.children.append(self._parameters())
        if self.at("OP", "->"):
            node.children.append(anon(self.advance().value))
            node.children.append(self.parse_expression())
        node.children.append(anon(self.expect("OP", ":").value))
        node.children.append(self._block())
        return node

    def _parameters(self) -> CSTNode:
        node = CSTNode("parameters", [anon(self.expect("OP", "(").value)])
        while not self.at("OP", ")"):
            name = leaf("identifier", self.expect("NAME").value)
            if self.at("OP", "="):
                eq = anon(self.advance().value)
                node.children.append(
                    CSTNode("default_parameter", [name, eq, self.parse_expression()])
                )
            else:
                node.children.append(name)
            if self.at("OP", ","):
                node.children.append(anon(self.advance().value))
            elif not self.at("OP", ")"):
                raise _ParseFailure(f"bad parameter list near {self.peek()!r}")
        node.children.append(anon(self.advance().value))
        return node

    # -- expressions (precedence climbing) ----------------------------------

    def parse_expression(self) -> CSTNode:
        return self._or_expr()

    def _or_expr(self) -> CSTNode:
        node = self._and_expr()
        while self.at("KEYWORD", "or"):
            op = anon(self.advance().value)
            node = CSTNode("boolean_operator", [node, op, self._and_expr()])
        return node

    def _and_expr(self) -> CSTNode:
        node = self._not_expr()
        while self.at("KEYWORD", "and"):
            op = anon(self.advance().value)
            node = CSTNode("boolean_operator", [node, op, self._not_expr()])
        return node

    def _not_expr(self) -> CSTNode:
        if self.at("KEYWORD", "not"):
            op = anon(self.advance().value)
            return CSTNode("not_operator", [op, self._not_expr()])
        return self._comparison()

    def _comparison(self) -> CSTNode:
        node = self._bitor()
        parts: list[CSTNode] = []
        while True:
            if self.peek().kind == "OP" and self.peek().value in _COMPARE_OPS:
                parts.append(anon(self.advance().value))
            elif self.at("KEYWORD", "in"):
                parts.append(anon(self.advance().value))
            elif self.at("KEYWORD", "not") and self.peek(1).value == "in":
                parts.append(anon(self.advance().value))
                parts.append(anon(self.advance().value))
            elif self.at("KEYWORD", "is"):
                parts.append(anon(self.advance().value))
                if self.at("KEYWORD", "not"):
                    parts.append(anon(self.advance().value))
            else:
                break
            parts.append(self._bitor())
        if not parts:
            return node
        return CSTNode("comparison_operator", [node, *parts])

    _BINARY_LEVELS = [
        {"|"},
        {"^"},
        {"&"},
        {"<<", ">>"},
        {"+", "-"},
        {"*", "/", "//", "%", "@"},
    ]

    def _bitor(self) -> CSTNode:
        return self._binary(0)

    def _binary(self, level: int) -> CSTNode:
        if level >= len(self._BINARY_LEVELS):
            return self._unary()
        node = self._binary(level + 1)
        ops = self._BINARY_LEVELS[level]
        while self.peek().kind == "OP" and self.peek().value in ops:
            op = anon(self.advance().value)
            node = CSTNode("binary_operator", [node, op, self._binary(level + 1)])
        return node

    def _unary(self) -> CSTNode:
        if self.peek().kind == "OP" and self.peek().value in ("-", "+", "~"):
            op = anon(self.advance().value)
            return CSTNode("unary_operator", [op, self._unary()])
        return self._power()

    def _power(self) -> CSTNode:
        node = self._postfix_expression(self._atom())
        if self.at("OP", "**"):
            op = anon(self.advance().value)
            return CSTNode("binary_operator", [node, op, self._unary()])
        return node

    def _postfix_expression(self, node: CSTNode) -> CSTNode:
        while True:
            if self.at("OP", "("):
                node = CSTNode("call", [node, self._argument_list()])
            elif self.at("OP", "["):
                sub = CSTNode("subscript", [node, anon(self.advance().value)])
                sub.children.append(self._subscript_index())
                sub.children.append(anon(self.expect("OP", "]").value))
                node = sub
            elif self.at("OP", "."):
                dot = anon(self.advance().value)
                name = leaf("identifier", self.expect("NAME").value)
                node = CSTNode("attribute", [node, dot, name])
            else:
                return node

    def _subscript_index(self) -> CSTNode:
        # Slices keep their ':' leaves inside a slice node.
        parts: list[CSTNode] = []
        saw_colon = False
        while not self.at("OP", "]"):
            if self.at("OP", ":"):
                saw_colon = True
                parts.append(anon(self.advance().value))
            else:
                parts.append(self.parse_expression())
                if not (self.at("OP", ":") or self.at("OP", "]")):
                    raise _ParseFailure(f"bad subscript near {self.peek()!r}")
        if saw_colon:
            return CSTNode("slice", parts)
        if len(parts) != 1:
            raise _ParseFailure("empty subscript")
        return parts[0]

    def _argument_list(self) -> CSTNode:
        node = CSTNode("argument_list", [anon(self.expect("OP", "(").value)])
        while not self.at("OP", ")"):
            if self.at("NAME") and self.peek(1).kind == "OP" and self.peek(1).value == "=":
                name = leaf("identifier", self.advance().value)
                eq = anon(self.advance().value)
                node.children.append(
                    CSTNode("keyword_argument", [name, eq, self.parse_expression()])
                )
            else:
                node.children.append(self.parse_expression())
            if self.at("OP", ","):
                node.children.append(anon(self.advance().value))
            elif not self.at("OP", ")"):
                raise _ParseFailure(f"bad argument list near {self.peek()!r}")
        node.children.append(anon(self.advance().value))
        return node

    def _atom(self) -> CSTNode:
        tok = self.peek()
        if tok.kind == "NAME":
            return leaf("identifier", self.advance().value)
        if tok.kind in ("INT", "FLOAT", "STRING"):
            return _token_leaf(self.advance())
        if tok.kind == "KEYWORD" and tok.value in ("True", "False", "None"):
            return _token_leaf(self.advance())
        if self.at("OP", "("):
            open_ = anon(self.advance().value)
            if self.at("OP", ")"):
                return CSTNode("tuple", [open_, anon(self.advance().value)])
            inner = self.parse_expression()
            if self.at("OP", ","):
                items = [open_, inner]
                while self.at("OP", ","):
                    items.append(anon(self.advance().value))
                    if self.at("OP", ")"):
                        break
                    items.append(self.parse_expression())
                items.append(anon(self.expect("OP", ")").value))
                return CSTNode("tuple", items)
            close = anon(self.expect("OP", ")").value)
            return CSTNode("parenthesized_expression", [open_, inner, close])
        if self.at("OP", "["):
            node = CSTNode("list", [anon(self.advance().value)])
            while not self.at("OP", "]"):
                node.children.append(self.parse_expression())
                if self.at("OP", ","):
                    node.children.append(anon(self.advance().value))
                elif not self.at("OP", "]"):
                    raise _ParseFailure(f"bad list near {self.peek()!r}")
            node.children.append(anon(self.advance().value))
            return node
        if self.at("OP", "{"):
            return self._brace_atom()
        raise _ParseFailure(f"unexpected token {tok!r}")

    def _brace_atom(self) -> CSTNode:
        items: list[CSTNode] = [anon(self.advance().value)]
        is_dict = False
        while not self.at("OP", "}"):
            key = self.parse_expression()
            if self.at("OP", ":"):
                is_dict = True
                colon = anon(self.advance().value)
                items.append(CSTNode("pair", [key, colon, self.parse_expression()]))
            else:
                items.append(key)
            if self.at("OP", ","):
                items.append(anon(self.advance().value))
            elif not self.at("OP", "}"):
                raise _ParseFailure(f"bad braces near {self.peek()!r}")
        items.append(anon(self.advance().value))
        return CSTNode("dictionary" if is_dict else "set", items)


def parse(source: str) -> CSTNode:
    """Parse source text into a CST with module root."""
    return PythonParser(tokenize(source)).parse_module()
