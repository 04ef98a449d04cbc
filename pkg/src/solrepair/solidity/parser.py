"""Recursive-descent parser for the supported Solidity subset.

Declaration structure (contracts, state variables, functions, modifiers) is
parsed strictly and malformed declarations raise :class:`ParseError`.
Statements outside the subset (assembly, try/catch, tuple destructuring,
do-while) degrade to :class:`OpaqueStatement` nodes that keep the raw text
and span, so nothing is dropped silently.
"""
from __future__ import annotations

from ..errors import ParseError
from ..source import SourceFile, SourceSpan
from .lexer import Lexer, Token, TokenType
from . import nodes as n

UNIT_SUFFIXES = {"wei", "gwei", "ether", "seconds", "minutes", "hours",
                 "days", "weeks", "years"}

VISIBILITIES = {"public", "private", "internal", "external"}

# binary operators from lowest to highest precedence
_BINARY_LEVELS = [
    ["||"],
    ["&&"],
    ["|"],
    ["^"],
    ["&"],
    ["==", "!="],
    ["<", ">", "<=", ">="],
    ["<<", ">>"],
    ["+", "-"],
    ["*", "/", "%"],
    ["**"],
]

ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
              "<<=", ">>="}


class _Parser:
    def __init__(self, tokens: list[Token], file_id: int, text: str):
        self.tokens = tokens
        self.file_id = file_id
        self.text = text
        self.pos = 0

    # --- token helpers ---

    def peek(self, offset: int = 0) -> Token:
        pos = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[pos]

    def at(self, *values: str) -> bool:
        return self.peek().value in values

    def at_type(self, ttype: TokenType) -> bool:
        return self.peek().type is ttype

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.type is not TokenType.EOF:
            self.pos += 1
        return tok

    def expect(self, value: str, context: str) -> Token:
        tok = self.peek()
        if tok.value != value:
            raise self.error(f"expected {value!r} in {context}, "
                             f"got {tok.value!r}", tok)
        return self.advance()

    def expect_identifier(self, context: str) -> Token:
        tok = self.peek()
        if tok.type is not TokenType.IDENTIFIER:
            raise self.error(f"expected identifier in {context}, "
                             f"got {tok.value!r}", tok)
        return self.advance()

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, self.file_id, tok.line)

    def span(self, start: Token, end: Token | None = None) -> SourceSpan:
        end = end or self.tokens[max(self.pos - 1, 0)]
        return SourceSpan(self.file_id, start.line, start.col,
                          end.end_line, end.end_col)

    # --- top level ---

    def parse_unit(self) -> n.Ast:
        start = self.peek()
        imports: list[n.ImportDirective] = []
        contracts: list[n.ContractDecl] = []
        others: list[n.OpaqueDecl] = []
        seen = set()
        while not self.at_type(TokenType.EOF):
            tok = self.peek()
            if tok.value == "pragma":
                others.append(self._opaque_decl("pragma"))
            elif tok.value == "import":
                imports.append(self._parse_import())
            elif tok.value in ("contract", "interface", "library", "abstract"):
                contract = self._parse_contract()
                if contract.name in seen:
                    raise self.error(
                        f"duplicate contract name {contract.name!r}", tok)
                seen.add(contract.name)
                contracts.append(contract)
            elif tok.value in ("struct", "enum", "function", "using", "type",
                              "error", "event"):
                others.append(self._opaque_decl(tok.value))
            elif tok.type is TokenType.IDENTIFIER:
                # top-level constants and the like
                others.append(self._opaque_decl(tok.value))
            else:
                raise self.error(f"unexpected token {tok.value!r} "
                                 "at file level", tok)
        end = self.tokens[max(self.pos - 1, 0)] if self.pos else start
        return n.Ast(self.span(start, end), tuple(imports), tuple(contracts),
                     tuple(others))

    def _parse_import(self) -> n.ImportDirective:
        start = self.expect("import", "import directive")
        path = None
        while not self.at_type(TokenType.EOF) and not self.at(";"):
            tok = self.advance()
            if tok.type is TokenType.STRING and path is None:
                path = tok.value[1:-1]
        self.expect(";", "import directive")
        if path is None:
            raise self.error("import directive has no path string", start)
        return n.ImportDirective(self.span(start), path)

    def _opaque_decl(self, keyword: str) -> n.OpaqueDecl:
        start = self.peek()
        self._skip_to_decl_end()
        span = self.span(start)
        return n.OpaqueDecl(span, keyword, self._raw(start))

    def _raw(self, start: Token) -> str:
        end = self.tokens[max(self.pos - 1, 0)]
        return self.text[start.offset:end.end_offset]

    def _skip_to_decl_end(self):
        """Consume until a top-level ';' or a balanced brace block."""
        depth = 0
        while not self.at_type(TokenType.EOF):
            tok = self.advance()
            if tok.value in ("(", "["):
                depth += 1
            elif tok.value in (")", "]"):
                depth -= 1
            elif tok.value == "{":
                braces = 1
                while braces and not self.at_type(TokenType.EOF):
                    inner = self.advance()
                    if inner.value == "{":
                        braces += 1
                    elif inner.value == "}":
                        braces -= 1
                if depth == 0 and not self.at(";"):
                    return
            elif tok.value == ";" and depth == 0:
                return

    # --- contracts ---

    def _parse_contract(self) -> n.ContractDecl:
        start = self.peek()
        if self.at("abstract"):
            self.advance()
        kind = self.advance().value  # contract | interface | library
        if kind not in ("contract", "interface", "library"):
            raise self.error(f"expected contract keyword, got {kind!r}", start)
        name = self.expect_identifier("contract declaration").value

        inheritance: list[str] = []
        if self.at("is"):
            self.advance()
            while True:
                base = self.expect_identifier("inheritance list").value
                while self.at("."):  # qualified base name: keep last segment
                    self.advance()
                    base = self.expect_identifier("inheritance list").value
                if self.at("("):
                    self._skip_balanced("(", ")")
                inheritance.append(base)
                if self.at(","):
                    self.advance()
                    continue
                break

        self.expect("{", "contract body")
        state_vars: list[n.StateVarDecl] = []
        functions: list[n.FunctionDecl] = []
        others: list[n.OpaqueDecl] = []
        while not self.at("}"):
            if self.at_type(TokenType.EOF):
                raise self.error(f"unterminated contract {name!r}", start)
            tok = self.peek()
            if tok.value in ("function", "constructor", "receive",
                            "fallback", "modifier"):
                functions.append(self._parse_function())
            elif tok.value in ("struct", "enum", "event", "error", "using"):
                others.append(self._opaque_decl(tok.value))
            elif (tok.type is TokenType.IDENTIFIER
                  or tok.value in ("mapping", "payable")):
                state_vars.append(self._parse_state_var())
            else:
                raise self.error(f"unexpected token {tok.value!r} in "
                                 f"contract {name!r}", tok)
        self.expect("}", "contract body")
        return n.ContractDecl(self.span(start), name, kind,
                              tuple(inheritance), tuple(state_vars),
                              tuple(functions), tuple(others))

    def _skip_balanced(self, open_v: str, close_v: str):
        self.expect(open_v, "balanced group")
        depth = 1
        while depth and not self.at_type(TokenType.EOF):
            tok = self.advance()
            if tok.value == open_v:
                depth += 1
            elif tok.value == close_v:
                depth -= 1

    # --- declarations ---

    def _parse_type_text(self) -> str:
        parts: list[str] = []
        tok = self.peek()
        if tok.value == "mapping":
            parts.append(self.advance().value)
            parts.append(self.expect("(", "mapping type").value)
            depth = 1
            while depth and not self.at_type(TokenType.EOF):
                inner = self.advance()
                if inner.value == "(":
                    depth += 1
                elif inner.value == ")":
                    depth -= 1
                parts.append(inner.value)
        elif tok.type is TokenType.IDENTIFIER:
            parts.append(self.advance().value)
            while self.at("."):
                parts.append(self.advance().value)
                parts.append(self.expect_identifier("type name").value)
            if parts[-1] == "address" and self.at("payable"):
                parts.append(" ")
                parts.append(self.advance().value)
        else:
            raise self.error(f"expected a type, got {tok.value!r}", tok)
        # array suffixes
        while self.at("["):
            parts.append(self.advance().value)
            depth = 1
            while depth and not self.at_type(TokenType.EOF):
                inner = self.advance()
                if inner.value == "[":
                    depth += 1
                elif inner.value == "]":
                    depth -= 1
                parts.append(inner.value)
        return "".join(parts)

    def _parse_state_var(self) -> n.StateVarDecl:
        start = self.peek()
        type_text = self._parse_type_text()
        visibility = ""
        mutability = ""
        while self.at("public", "private", "internal", "constant",
                      "immutable", "override"):
            word = self.advance().value
            if word in VISIBILITIES:
                visibility = word
            elif word in ("constant", "immutable"):
                mutability = word
            if word == "override" and self.at("("):
                self._skip_balanced("(", ")")
        name = self.expect_identifier("state variable declaration").value
        initializer = None
        if self.at("="):
            self.advance()
            initializer = self._parse_expression()
        self.expect(";", "state variable declaration")
        return n.StateVarDecl(self.span(start), name, type_text, visibility,
                              mutability, initializer)

    def _parse_function(self) -> n.FunctionDecl:
        start = self.advance()  # function | constructor | ... | modifier
        keyword = start.value
        if keyword == "function":
            kind = "function"
            name = self.expect_identifier("function declaration").value
        elif keyword == "modifier":
            kind = "modifier"
            name = self.expect_identifier("modifier declaration").value
        else:
            kind = keyword
            name = keyword

        params: tuple[n.Param, ...] = ()
        if keyword != "modifier" or self.at("("):
            params = self._parse_params("parameter list")

        visibility = ""
        mutability = ""
        modifiers: list[n.ModifierInvocation] = []
        returns: tuple[n.Param, ...] = ()
        while True:
            tok = self.peek()
            if tok.value in VISIBILITIES:
                visibility = self.advance().value
            elif tok.value in ("view", "pure", "payable"):
                mutability = self.advance().value
            elif tok.value in ("virtual",):
                self.advance()
            elif tok.value == "override":
                self.advance()
                if self.at("("):
                    self._skip_balanced("(", ")")
            elif tok.value == "returns":
                self.advance()
                returns = self._parse_params("returns list")
            elif tok.type is TokenType.IDENTIFIER:
                mod_start = self.advance()
                args: tuple = ()
                if self.at("("):
                    args = self._parse_call_args()
                modifiers.append(n.ModifierInvocation(
                    self.span(mod_start), mod_start.value, args))
            else:
                break

        body: tuple[n.Statement, ...] | None
        if self.at(";"):
            self.advance()
            body = None
        elif self.at("{"):
            body = self._parse_block_statements()
        else:
            raise self.error(
                f"expected function body or ';', got {self.peek().value!r}")
        return n.FunctionDecl(self.span(start), name, kind, params, returns,
                              visibility, mutability, tuple(modifiers), body)

    def _parse_params(self, context: str) -> tuple[n.Param, ...]:
        self.expect("(", context)
        params: list[n.Param] = []
        while not self.at(")"):
            if self.at_type(TokenType.EOF) or self.at("{", "}", ";"):
                raise self.error(
                    f"unexpected token {self.peek().value!r} in {context}")
            p_start = self.peek()
            type_text = self._parse_type_text()
            if self.at("memory", "storage", "calldata"):
                self.advance()
            if self.at("indexed"):
                self.advance()
            name = ""
            if self.at_type(TokenType.IDENTIFIER):
                name = self.advance().value
            params.append(n.Param(self.span(p_start), type_text, name))
            if self.at(","):
                self.advance()
            elif not self.at(")"):
                raise self.error(
                    f"unexpected token {self.peek().value!r} in {context}")
        self.expect(")", context)
        return tuple(params)

    # --- statements ---

    def _parse_block_statements(self) -> tuple[n.Statement, ...]:
        self.expect("{", "block")
        statements: list[n.Statement] = []
        while not self.at("}"):
            if self.at_type(TokenType.EOF):
                raise self.error("unterminated block")
            statements.append(self._parse_statement())
        self.expect("}", "block")
        return tuple(statements)

    def _parse_statement(self) -> n.Statement:
        start = self.peek()
        start_pos = self.pos
        try:
            return self._parse_statement_strict()
        except ParseError:
            self.pos = start_pos
            return self._recover_opaque(start)

    def _recover_opaque(self, start: Token) -> n.OpaqueStatement:
        """Swallow one malformed/unsupported statement, keeping its span."""
        start_pos = self.pos
        depth = 0
        while not self.at_type(TokenType.EOF):
            tok = self.peek()
            if depth == 0 and tok.value == "}":
                break
            if (depth == 0 and tok.value == "{"
                    and not (self.peek(1).type is TokenType.IDENTIFIER
                             and self.peek(2).value == ":")):
                # trailing block (assembly, try/catch, do-while); call
                # options `{gas: ..}` are part of the expression instead
                self._consume_braces()
                if self.at(";"):
                    self.advance()
                    break
                if self.at("catch"):
                    self.advance()
                    continue
                if self.at("while"):  # do-while: scan on to the ';'
                    continue
                break
            self.advance()
            if tok.value in ("(", "["):
                depth += 1
            elif tok.value in (")", "]"):
                depth = max(depth - 1, 0)
            elif tok.value == "{":  # call options
                self.pos -= 1
                self._consume_braces()
            elif tok.value == ";" and depth == 0:
                break
        if self.pos == start_pos:
            self.advance()  # always make progress
        return n.OpaqueStatement(self.span(start), self._raw(start))

    def _consume_braces(self):
        self.expect("{", "block")
        braces = 1
        while braces and not self.at_type(TokenType.EOF):
            inner = self.advance()
            if inner.value == "{":
                braces += 1
            elif inner.value == "}":
                braces -= 1

    def _parse_statement_strict(self) -> n.Statement:
        tok = self.peek()
        if tok.value == "{":
            start = tok
            stmts = self._parse_block_statements()
            return n.Block(self.span(start), stmts)
        if tok.value == "unchecked":
            start = self.advance()
            stmts = self._parse_block_statements()
            return n.Block(self.span(start), stmts)
        if tok.value == "if":
            return self._parse_if()
        if tok.value == "for":
            return self._parse_for()
        if tok.value == "while":
            return self._parse_while()
        if tok.value == "return":
            start = self.advance()
            value = None
            if not self.at(";"):
                value = self._parse_expression()
            self.expect(";", "return statement")
            return n.ReturnStatement(self.span(start), value)
        if tok.value in ("break", "continue"):
            start = self.advance()
            self.expect(";", f"{start.value} statement")
            cls = n.BreakStatement if start.value == "break" \
                else n.ContinueStatement
            return cls(self.span(start))
        if tok.value == "emit":
            start = self.advance()
            call = self._parse_expression()
            if not isinstance(call, n.CallExpr):
                raise self.error("emit requires an event call", start)
            self.expect(";", "emit statement")
            return n.EmitStatement(self.span(start), call)
        if tok.value == "revert":
            return self._parse_revert()
        if tok.value == "delete":
            start = self.advance()
            operand = self._parse_expression()
            self.expect(";", "delete statement")
            expr = n.UnaryOp(self.span(start), "delete", operand)
            return n.ExprStatement(self.span(start), expr)
        if tok.value in ("assembly", "try", "do"):
            # outside the subset by design
            raise self.error(f"unsupported construct {tok.value!r}", tok)

        # local variable declaration or expression/assignment
        decl = self._try_parse_var_decl()
        if decl is not None:
            return decl
        return self._parse_expr_or_assignment()

    def _parse_revert(self) -> n.Statement:
        start = self.advance()
        callee = n.Identifier(self.span(start, start), "revert")
        args: tuple[n.Expr, ...] = ()
        if self.at("("):
            args = self._parse_call_args()
        elif self.at_type(TokenType.IDENTIFIER):
            args = (self._parse_expression(),)
        self.expect(";", "revert statement")
        span = self.span(start)
        return n.ExprStatement(span, n.CallExpr(span, callee, args))

    def _try_parse_var_decl(self) -> n.VarDeclStatement | None:
        tok = self.peek()
        if not (tok.type is TokenType.IDENTIFIER or tok.value == "mapping"):
            return None
        saved = self.pos
        try:
            type_text = self._parse_type_text()
            if self.at("memory", "storage", "calldata"):
                self.advance()
            if not self.at_type(TokenType.IDENTIFIER):
                raise self.error("not a declaration")
            name = self.advance().value
            if not self.at("=", ";"):
                raise self.error("not a declaration")
        except ParseError:
            self.pos = saved
            return None
        initializer = None
        if self.at("="):
            self.advance()
            initializer = self._parse_expression()
        self.expect(";", "variable declaration")
        return n.VarDeclStatement(self.span(tok), type_text, name,
                                  initializer)

    def _parse_expr_or_assignment(self) -> n.Statement:
        start = self.peek()
        expr = self._parse_expression()
        if self.peek().value in ASSIGN_OPS:
            op = self.advance().value
            value = self._parse_expression()
            self.expect(";", "assignment")
            return n.Assignment(self.span(start), expr, op, value)
        self.expect(";", "expression statement")
        return n.ExprStatement(self.span(start), expr)

    def _parse_if(self) -> n.IfStatement:
        start = self.expect("if", "if statement")
        self.expect("(", "if condition")
        condition = self._parse_expression()
        self.expect(")", "if condition")
        then_body = self._parse_body()
        else_body = None
        if self.at("else"):
            self.advance()
            else_body = self._parse_body()
        return n.IfStatement(self.span(start), condition, then_body,
                             else_body)

    def _parse_body(self) -> tuple[n.Statement, ...]:
        if self.at("{"):
            return self._parse_block_statements()
        return (self._parse_statement(),)

    def _parse_for(self) -> n.ForStatement:
        start = self.expect("for", "for statement")
        self.expect("(", "for clauses")
        init: n.Statement | None = None
        if not self.at(";"):
            init = self._try_parse_var_decl()
            if init is None:
                init = self._parse_expr_or_assignment()
        else:
            self.advance()
        condition = None
        if not self.at(";"):
            condition = self._parse_expression()
        self.expect(";", "for clauses")
        update: n.Statement | None = None
        if not self.at(")"):
            u_start = self.peek()
            expr = self._parse_expression()
            if self.peek().value in ASSIGN_OPS:
                op = self.advance().value
                value = self._parse_expression()
                update = n.Assignment(self.span(u_start), expr, op, value)
            else:
                update = n.ExprStatement(self.span(u_start), expr)
        self.expect(")", "for clauses")
        body = self._parse_body()
        return n.ForStatement(self.span(start), init, condition, update, body)

    def _parse_while(self) -> n.WhileStatement:
        start = self.expect("while", "while statement")
        self.expect("(", "while condition")
        condition = self._parse_expression()
        self.expect(")", "while condition")
        body = self._parse_body()
        return n.WhileStatement(self.span(start), condition, body)

    # --- expressions ---

    def _parse_expression(self) -> n.Expr:
        return self._parse_ternary()

    def _parse_ternary(self) -> n.Expr:
        start = self.peek()
        condition = self._parse_binary(0)
        if self.at("?"):
            self.advance()
            then_expr = self._parse_expression()
            self.expect(":", "conditional expression")
            else_expr = self._parse_expression()
            return n.Conditional(self.span(start), condition, then_expr,
                                 else_expr)
        return condition

    def _parse_binary(self, level: int) -> n.Expr:
        if level >= len(_BINARY_LEVELS):
            return self._parse_unary()
        start = self.peek()
        left = self._parse_binary(level + 1)
        while self.peek().value in _BINARY_LEVELS[level]:
            op = self.advance().value
            right = self._parse_binary(level + 1)
            left = n.BinaryOp(self.span(start), op, left, right)
        return left

    def _parse_unary(self) -> n.Expr:
        tok = self.peek()
        if tok.value in ("!", "~", "-", "+", "++", "--", "delete"):
            start = self.advance()
            operand = self._parse_unary()
            return n.UnaryOp(self.span(start), start.value, operand)
        if tok.value == "new":
            start = self.advance()
            type_text = self._parse_type_text()
            new = n.NewExpr(self.span(start), type_text)
            return self._parse_postfix(new, start)
        start = self.peek()
        primary = self._parse_primary()
        return self._parse_postfix(primary, start)

    def _parse_primary(self) -> n.Expr:
        tok = self.peek()
        if tok.type is TokenType.NUMBER:
            self.advance()
            value = tok.value
            if self.peek().value in UNIT_SUFFIXES:
                value += " " + self.advance().value
            kind = "hex" if value.startswith(("0x", "0X")) else "number"
            return n.Literal(self.span(tok), kind, value)
        if tok.type is TokenType.STRING:
            self.advance()
            return n.Literal(self.span(tok), "string", tok.value)
        if tok.value in ("true", "false"):
            self.advance()
            return n.Literal(self.span(tok), "bool", tok.value)
        if tok.type is TokenType.IDENTIFIER or tok.value in ("this", "super",
                                                             "type",
                                                             "payable"):
            self.advance()
            return n.Identifier(self.span(tok), tok.value)
        if tok.value == "(":
            start = self.advance()
            items = [self._parse_expression()]
            while self.at(","):
                self.advance()
                items.append(self._parse_expression())
            self.expect(")", "parenthesized expression")
            if len(items) == 1:
                return items[0]
            return n.TupleExpr(self.span(start), tuple(items))
        raise self.error(f"unexpected token {tok.value!r} in expression", tok)

    def _parse_postfix(self, expr: n.Expr, start: Token) -> n.Expr:
        while True:
            tok = self.peek()
            if tok.value == ".":
                self.advance()
                member = self.peek()
                if member.type not in (TokenType.IDENTIFIER,
                                       TokenType.KEYWORD):
                    raise self.error("expected member name after '.'", member)
                self.advance()
                expr = n.MemberAccess(self.span(start), expr, member.value)
            elif tok.value == "[":
                self.advance()
                index = None
                if not self.at("]"):
                    index = self._parse_expression()
                self.expect("]", "index access")
                expr = n.IndexAccess(self.span(start), expr, index)
            elif tok.value == "(":
                args = self._parse_call_args()
                expr = n.CallExpr(self.span(start), expr, args)
            elif (tok.value == "{"
                  and self.peek(1).type is TokenType.IDENTIFIER
                  and self.peek(2).value == ":"):
                options = self._parse_call_options()
                self_tok = self.peek()
                if self_tok.value != "(":
                    raise self.error("expected call after call options",
                                     self_tok)
                args = self._parse_call_args()
                expr = n.CallExpr(self.span(start), expr, args, options)
            elif tok.value in ("++", "--"):
                self.advance()
                expr = n.UnaryOp(self.span(start), tok.value, expr,
                                 prefix=False)
            else:
                return expr

    def _parse_call_args(self) -> tuple[n.Expr, ...]:
        self.expect("(", "call arguments")
        args: list[n.Expr] = []
        while not self.at(")"):
            if self.at_type(TokenType.EOF):
                raise self.error("unterminated call arguments")
            if (self.peek().type is TokenType.IDENTIFIER
                    and self.peek(1).value == ":"):
                # named argument {a: 1} style inside parens: name, then value
                self.advance()
                self.advance()
            args.append(self._parse_expression())
            if self.at(","):
                self.advance()
        self.expect(")", "call arguments")
        return tuple(args)

    def _parse_call_options(self) -> tuple[tuple[str, n.Expr], ...]:
        self.expect("{", "call options")
        options: list[tuple[str, n.Expr]] = []
        while not self.at("}"):
            if self.at_type(TokenType.EOF):
                raise self.error("unterminated call options")
            name = self.expect_identifier("call options").value
            self.expect(":", "call options")
            options.append((name, self._parse_expression()))
            if self.at(","):
                self.advance()
        self.expect("}", "call options")
        return tuple(options)


def parse_source(file: SourceFile) -> n.Ast:
    """Parse one source file into an :class:`Ast`.

    Raises :class:`ParseError` on malformed declarations; unsupported
    statements inside function bodies become opaque nodes instead.
    """
    tokens = Lexer(file.text, file.file_id).tokenize()
    return _Parser(tokens, file.file_id, file.text).parse_unit()
