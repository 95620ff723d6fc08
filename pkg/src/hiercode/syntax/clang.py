"""Recursive-descent CST parser for a brace-based C/C++ grammar subset.

Handles includes, using-directives, function definitions, declarations
with initializers, the usual control flow (if/else, for, while), and a
C expression grammar with assignment, binary, unary, update, call,
subscript, and field operators. Unsupported constructs degrade to ERROR
nodes at statement granularity.

Node-type names follow the common grammar convention for this language:
translation_unit, function_definition, compound_statement, declaration,
call_expression, and so on.
"""

from __future__ import annotations

from .tree import CSTNode, anon, leaf

KEYWORDS = {
    "if", "else", "for", "while", "do", "return", "break", "continue",
    "int", "float", "double", "char", "void", "bool", "long", "short",
    "unsigned", "signed", "const", "true", "false", "using", "namespace",
    "struct", "class", "switch", "case", "default", "sizeof", "new",
    "delete", "auto", "static",
}

PRIMITIVE_TYPES = {
    "int", "float", "double", "char", "void", "bool", "long", "short",
    "unsigned", "signed", "auto",
}

_OPERATORS = [
    "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::",
    "+", "-", "*", "/", "%", "<", ">", "=", "!", "&", "|", "^", "~",
    "(", ")", "[", "]", "{", "}", ",", ";", ":", ".", "?", "#",
]

_ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "<<=", ">>=", "&=", "|=", "^="}

# Binary precedence levels, loosest first.
_BINARY_LEVELS = [
    {"||"},
    {"&&"},
    {"|"},
    {"^"},
    {"&"},
    {"==", "!="},
    {"<", ">", "<=", ">="},
    {"<<", ">>"},
    {"+", "-"},
    {"*", "/", "%"},
]


class Token:
    __slots__ = ("kind", "value")

    def __init__(self, kind: str, value: str = ""):
        self.kind = kind  # NAME KEYWORD NUM STRING CHAR OP COMMENT EOF
        self.value = value

    def __repr__(self):
        return f"Token({self.kind}, {self.value!r})"


class _ParseFailure(Exception):
    pass


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if source.startswith("//", i):
            j = i
            while j < n and source[j] not in "\r\n":
                j += 1
            tokens.append(Token("COMMENT", source[i:j]))
            i = j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            j = n if j < 0 else j + 2
            tokens.append(Token("COMMENT", source[i:j]))
            i = j
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isalnum() or source[j] == "."):
                if source[j] in "eE" and j + 1 < n and source[j + 1] in "+-":
                    j += 1
                j += 1
            tokens.append(Token("NUM", source[i:j]))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            tokens.append(Token("KEYWORD" if word in KEYWORDS else "NAME", word))
            i = j
            continue
        if ch == '"':
            j = i + 1
            while j < n and source[j] != '"' and source[j] not in "\r\n":
                j += 2 if source[j] == "\\" else 1
            j = min(n, j + 1)
            tokens.append(Token("STRING", source[i:j]))
            i = j
            continue
        if ch == "'":
            j = i + 1
            while j < n and source[j] != "'" and source[j] not in "\r\n":
                j += 2 if source[j] == "\\" else 1
            j = min(n, j + 1)
            tokens.append(Token("CHAR", source[i:j]))
            i = j
            continue
        for op in _OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token("OP", op))
                i += len(op)
                break
        else:
            tokens.append(Token("OP", ch))
            i += 1
    tokens.append(Token("EOF"))
    return tokens


def _token_leaf(tok: Token) -> CSTNode:
    if tok.kind == "NAME":
        return leaf("identifier", tok.value)
    if tok.kind == "NUM":
        return leaf("number_literal", tok.value)
    if tok.kind == "STRING":
        return leaf("string_literal", tok.value)
    if tok.kind == "CHAR":
        return leaf("char_literal", tok.value)
    if tok.kind == "COMMENT":
        return leaf("comment", tok.value)
    if tok.kind == "KEYWORD":
        if tok.value in ("true", "false"):
            return leaf(tok.value, tok.value)
        if tok.value in PRIMITIVE_TYPES:
            return leaf("primitive_type", tok.value)
    return anon(tok.value)


class CParser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

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

    def parse_translation_unit(self) -> CSTNode:
        root = CSTNode("translation_unit")
        while not self.at("EOF"):
            if self.at("COMMENT"):
                root.children.append(_token_leaf(self.advance()))
                continue
            start = self.pos
            try:
                root.children.append(self._top_level())
            except _ParseFailure:
                root.children.append(self._recover(start))
        return root

    def _recover(self, start: int) -> CSTNode:
        self.pos = start
        err = CSTNode("ERROR")
        depth = 0
        while not self.at("EOF"):
            tok = self.advance()
            err.children.append(_token_leaf(tok))
            if tok.kind == "OP":
                if tok.value == "{":
                    depth += 1
                elif tok.value == "}":
                    depth -= 1
                    if depth <= 0:
                        break
                elif tok.value == ";" and depth == 0:
                    break
        if not err.children:
            err.children.append(_token_leaf(self.advance()))
        return err

    # -- top-level forms ----------------------------------------------------

    def _top_level(self) -> CSTNode:
        if self.at("OP", "#"):
            return self._preproc_include()
        if self.at("KEYWORD", "using"):
            return self._using_declaration()
        if self._looks_like_type():
            return self._function_or_declaration()
        return self.parse_statement()

    def _preproc_include(self) -> CSTNode:
        hash_ = self.advance()
        word = self.expect("NAME")
        if word.value != "include":
            raise _ParseFailure(f"unsupported preprocessor directive {word.value!r}")
        node = CSTNode("preproc_include", [anon(hash_.value + word.value)])
        if self.at("OP", "<"):
            parts = [self.advance().value]
            while not self.at("OP", ">") and not self.at("EOF"):
                parts.append(self.advance().value)
            parts.append(self.expect("OP", ">").value)
            node.children.append(leaf("system_lib_string", "".join(parts)))
        else:
            node.children.append(_token_leaf(self.expect("STRING")))
        return node

    def _using_declaration(self) -> CSTNode:
        node = CSTNode("using_declaration", [anon(self.advance().value)])
        if self.at("KEYWORD", "namespace"):
            node.children.append(anon(self.advance().value))
        node.children.append(leaf("identifier", self.expect("NAME").value))
        node.children.append(anon(self.expect("OP", ";").value))
        return node

    def _looks_like_type(self) -> bool:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.value in PRIMITIVE_TYPES:
            return True
        if tok.kind == "KEYWORD" and tok.value == "const":
            return True
        # NAME NAME ... looks like "Type ident"; NAME alone is an expression.
        if tok.kind == "NAME" and self.peek(1).kind == "NAME":
            return True
        return False

    def _type(self) -> CSTNode:
        parts: list[Token] = []
        if self.at("KEYWORD", "const"):
            parts.append(self.advance())
        while self.peek().kind == "KEYWORD" and self.peek().value in PRIMITIVE_TYPES:
            parts.append(self.advance())
        if not parts or (len(parts) == 1 and parts[0].value == "const"):
            name = self.expect("NAME")
            if parts:
                wrapper = CSTNode("type_descriptor", [anon(parts[0].value)])
                wrapper.children.append(leaf("type_identifier", name.value))
                return wrapper
            return leaf("type_identifier", name.value)
        if len(parts) == 1:
            return _token_leaf(parts[0])
        joined = " ".join(p.value for p in parts)
        if parts[0].value == "const":
            wrapper = CSTNode("type_descriptor", [anon(parts[0].value)])
            rest = " ".join(p.value for p in parts[1:])
            wrapper.children.append(leaf("primitive_type", rest))
            return wrapper
        return leaf("primitive_type", joined)

    def _declarator_name(self) -> CSTNode:
        stars = []
        while self.at("OP", "*") or self.at("OP", "&"):
            stars.append(anon(self.advance().value))
        name = leaf("identifier", self.expect("NAME").value)
        if stars:
            return CSTNode("pointer_declarator", [*stars, name])
        return name

    def _function_or_declaration(self) -> CSTNode:
        type_node = self._type()
        declarator = self._declarator_name()
        if self.at("OP", "("):
            params = self._parameter_list()
            fdecl = CSTNode("function_declarator", [declarator, params])
            if self.at("OP", ";"):
                decl = CSTNode("declaration", [type_node, fdecl])
                decl.children.append(anon(self.advance().value))
                return decl
            body = self._compound_statement()
            return CSTNode("function_definition", [type_node, fdecl, body])
        return self._declaration_tail(type_node, declarator)

    def _declaration_tail(self, type_node: CSTNode, declarator: CSTNode) -> CSTNode:
        decl = CSTNode("declaration", [type_node])
        while True:
            if self.at("OP", "["):
                open_ = anon(self.advance().value)
                size = None if self.at("OP", "]") else self.parse_expression()
                close = anon(self.expect("OP", "]").value)
                kids = [declarator, open_] + ([size] if size else []) + [close]
                declarator = CSTNode("array_declarator", kids)
            if self.at("OP", "="):
                eq = anon(self.advance().value)
                value = self._assignment_expression()
                decl.children.append(CSTNode("init_declarator", [declarator, eq, value]))
            else:
                decl.children.append(declarator)
            if self.at("OP", ","):
                decl.children.append(anon(self.advance().value))
                declarator = self._declarator_name()
                continue
            break
        decl.children.append(anon(self.expect("OP", ";").value))
        return decl

    def _parameter_list(self) -> CSTNode:
        node = CSTNode("parameter_list", [anon(self.expect("OP", "(").value)])
        while not self.at("OP", ")"):
            param = CSTNode("parameter_declaration", [self._type()])
            if self.at("NAME") or self.at("OP", "*") or self.at("OP", "&"):
                param.children.append(self._declarator_name())
            node.children.append(param)
            if self.at("OP", ","):
                node.children.append(anon(self.advance().value))
            elif not self.at("OP", ")"):
                raise _ParseFailure(f"bad parameter list near {self.peek()!r}")
        node.children.append(anon(self.advance().value))
        return node

    # -- statements -------------------------------------------------------

    def parse_statement(self) -> CSTNode:
        tok = self.peek()
        if tok.kind == "OP" and tok.value == "{":
            return self._compound_statement()
        if tok.kind == "KEYWORD":
            if tok.value == "if":
                return self._if_statement()
            if tok.value == "for":
                return self._for_statement()
            if tok.value == "while":
                return self._while_statement()
            if tok.value == "return":
                return self._return_statement()
            if tok.value == "break":
                return self._semi_statement("break_statement")
            if tok.value == "continue":
                return self._semi_statement("continue_statement")
            if tok.value in PRIMITIVE_TYPES or tok.value == "const":
                return self._function_or_declaration()
            if tok.value in ("true", "false"):
                return self._expression_statement()
            raise _ParseFailure(f"unsupported statement keyword {tok.value!r}")
        if self._looks_like_type():
            return self._function_or_declaration()
        return self._expression_statement()

    def _body_statement(self) -> CSTNode:
        """Statement list inside braces, with per-statement recovery."""
        block = CSTNode("compound_statement", [anon(self.expect("OP", "{").value)])
        while not self.at("OP", "}") and not self.at("EOF"):
            if self.at("COMMENT"):
                block.children.append(_token_leaf(self.advance()))
                continue
            start = self.pos
            try:
                block.children.append(self.parse_statement())
            except _ParseFailure:
                block.children.append(self._recover(start))
        block.children.append(anon(self.expect("OP", "}").value))
        return block

    def _compound_statement(self) -> CSTNode:
        return self._body_statement()

    def _semi_statement(self, type_: str) -> CSTNode:
        node = CSTNode(type_, [anon(self.advance().value)])
        node.children.append(anon(self.expect("OP", ";").value))
        return node

    def _return_statement(self) -> CSTNode:
        node = CSTNode("return_statement", [anon(self.advance().value)])
        if not self.at("OP", ";"):
            node.children.append(self.parse_expression())
        node.children.append(anon(self.expect("OP", ";").value))
        return node

    def _expression_statement(self) -> CSTNode:
        node = CSTNode("expression_statement", [self.parse_expression()])
        node.children.append(anon(self.expect("OP", ";").value))
        return node

    def _condition_clause(self) -> CSTNode:
        node = CSTNode("condition_clause", [anon(self.expect("OP", "(").value)])
        node.children.append(self.parse_expression())
        node.children.append(anon(self.expect("OP", ")").value))
        return node

    def _if_statement(self) -> CSTNode:
        node = CSTNode("if_statement", [anon(self.advance().value)])
        node.children.append(self._condition_clause())
        node.children.append(self.parse_statement())
        if self.at("KEYWORD", "else"):
            clause = CSTNode("else_clause", [anon(self.advance().value)])
            clause.children.append(self.parse_statement())
            node.children.append(clause)
        return node

    def _while_statement(self) -> CSTNode:
        node = CSTNode("while_statement", [anon(self.advance().value)])
        node.children.append(self._condition_clause())
        node.children.append(self.parse_statement())
        return node

    def _for_statement(self) -> CSTNode:
        node = CSTNode("for_statement", [anon(self.advance().value)])
        node.children.append(anon(self.expect("OP", "(").value))
        if self.at("OP", ";"):
            node.children.append(anon(self.advance().value))
        elif self._looks_like_type():
            type_node = self._type()
            declarator = self._declarator_name()
            node.children.append(self._declaration_tail(type_node, declarator))
        else:
            node.children.append(self.parse_expression())
            node.children.append(anon(self.expect("OP", ";").value))
        if not self.at("OP", ";"):
            node.children.append(self.parse_expression())
        node.children.append(anon(self.expect("OP", ";").value))
        if not self.at("OP", ")"):
            node.children.append(self.parse_expression())
        node.children.append(anon(self.expect("OP", ")").value))
        node.children.append(self.parse_statement())
        return node

    # -- expressions --------------------------------------------------------

    def parse_expression(self) -> CSTNode:
        return self._assignment_expression()

    def _assignment_expression(self) -> CSTNode:
        left = self._binary(0)
        tok = self.peek()
        if tok.kind == "OP" and tok.value in _ASSIGN_OPS:
            op = anon(self.advance().value)
            right = self._assignment_expression()
            return CSTNode("assignment_expression", [left, op, right])
        return left

    def _binary(self, level: int) -> CSTNode:
        if level >= len(_BINARY_LEVELS):
            return self._unary()
        node = self._binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.peek().kind == "OP" and self.peek().value in ops:
            op = anon(self.advance().value)
            node = CSTNode("binary_expression", [node, op, self._binary(level + 1)])
        return node

    def _unary(self) -> CSTNode:
        tok = self.peek()
        if tok.kind == "OP" and tok.value in ("-", "+", "!", "~", "*", "&"):
            op = anon(self.advance().value)
            return CSTNode("unary_expression", [op, self._unary()])
        if tok.kind == "OP" and tok.value in ("++", "--"):
            op = anon(self.advance().value)
            return CSTNode("update_expression", [op, self._unary()])
        return self._postfix()

    def _postfix(self) -> CSTNode:
        node = self._atom()
        while True:
            if self.at("OP", "("):
                node = CSTNode("call_expression", [node, self._argument_list()])
            elif self.at("OP", "["):
                open_ = anon(self.advance().value)
                index = self.parse_expression()
                close = anon(self.expect("OP", "]").value)
                node = CSTNode("subscript_expression", [node, open_, index, close])
            elif self.at("OP", ".") or self.at("OP", "->"):
                op = anon(self.advance().value)
                name = leaf("identifier", self.expect("NAME").value)
                node = CSTNode("field_expression", [node, op, name])
            elif self.at("OP", "++") or self.at("OP", "--"):
                node = CSTNode("update_expression", [node, anon(self.advance().value)])
            else:
                return node

    def _argument_list(self) -> CSTNode:
        node = CSTNode("argument_list", [anon(self.expect("OP", "(").value)])
        while not self.at("OP", ")"):
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
            name = leaf("identifier", self.advance().value)
            # Qualified name: std::max and friends.
            while self.at("OP", "::"):
                sep = anon(self.advance().value)
                right = leaf("identifier", self.expect("NAME").value)
                name = CSTNode("qualified_identifier", [name, sep, right])
            return name
        if tok.kind in ("NUM", "STRING", "CHAR"):
            return _token_leaf(self.advance())
        if tok.kind == "KEYWORD" and tok.value in ("true", "false"):
            return _token_leaf(self.advance())
        if self.at("OP", "("):
            open_ = anon(self.advance().value)
            inner = self.parse_expression()
            close = anon(self.expect("OP", ")").value)
            return CSTNode("parenthesized_expression", [open_, inner, close])
        raise _ParseFailure(f"unexpected token {tok!r}")


def parse(source: str) -> CSTNode:
    """Parse source text into a CST with translation_unit root."""
    return CParser(tokenize(source)).parse_translation_unit()
