"""Tokenizer for the supported Solidity subset.

Comments and whitespace are skipped; every token records its 1-based start
and end position so parsed nodes can carry exact source spans.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto

from ..errors import ParseError


class TokenType(Enum):
    IDENTIFIER = auto()
    KEYWORD = auto()
    NUMBER = auto()
    STRING = auto()
    OPERATOR = auto()
    LPAREN = auto()
    RPAREN = auto()
    LBRACE = auto()
    RBRACE = auto()
    LBRACKET = auto()
    RBRACKET = auto()
    SEMICOLON = auto()
    COMMA = auto()
    DOT = auto()
    EOF = auto()


KEYWORDS = {
    "pragma", "import", "contract", "interface", "library", "abstract",
    "is", "struct", "enum", "event", "error", "modifier", "function",
    "constructor", "receive", "fallback", "mapping", "public", "private",
    "internal", "external", "view", "pure", "payable", "constant",
    "immutable", "virtual", "override", "indexed", "anonymous", "returns",
    "return", "if", "else", "for", "while", "do", "break", "continue",
    "new", "delete", "emit", "revert", "assembly", "unchecked", "try",
    "catch", "using", "memory", "storage", "calldata", "true", "false",
    "type",
}

# longest first so the scanner can take the first prefix match
OPERATORS = [
    ">>>=", "<<=", ">>=", "**=", "&&", "||", "==", "!=", "<=", ">=",
    "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "++",
    "--", "**", "=>", "->", "+", "-", "*", "/", "%", "!", "~", "&", "|",
    "^", "<", ">", "=", "?", ":",
]

_PUNCT = {
    "(": TokenType.LPAREN, ")": TokenType.RPAREN,
    "{": TokenType.LBRACE, "}": TokenType.RBRACE,
    "[": TokenType.LBRACKET, "]": TokenType.RBRACKET,
    ";": TokenType.SEMICOLON, ",": TokenType.COMMA, ".": TokenType.DOT,
}


@dataclass(frozen=True)
class Token:
    type: TokenType
    value: str
    line: int
    col: int
    end_line: int
    end_col: int
    offset: int = 0      # 0-based character offset of the first character
    end_offset: int = 0  # offset one past the last character


class Lexer:
    def __init__(self, text: str, file_id: int = 0):
        self.text = text
        self.file_id = file_id
        self.pos = 0
        self.line = 1
        self.col = 1

    def _peek(self, offset: int = 0) -> str:
        pos = self.pos + offset
        return self.text[pos] if pos < len(self.text) else ""

    def _advance(self) -> str:
        ch = self.text[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def _skip_trivia(self):
        while self.pos < len(self.text):
            ch = self._peek()
            if ch in " \t\r\n":
                self._advance()
            elif ch == "/" and self._peek(1) == "/":
                while self.pos < len(self.text) and self._peek() != "\n":
                    self._advance()
            elif ch == "/" and self._peek(1) == "*":
                self._advance()
                self._advance()
                while self.pos < len(self.text):
                    if self._peek() == "*" and self._peek(1) == "/":
                        self._advance()
                        self._advance()
                        break
                    self._advance()
            else:
                return

    def _read_string(self) -> str:
        quote = self._advance()
        out = quote
        while self.pos < len(self.text) and self._peek() != quote:
            if self._peek() == "\\":
                out += self._advance()
            if self._peek() == "\n":
                raise ParseError("unterminated string literal",
                                 self.file_id, self.line)
            out += self._advance()
        if self.pos >= len(self.text):
            raise ParseError("unterminated string literal",
                             self.file_id, self.line)
        out += self._advance()
        return out

    def _read_number(self) -> str:
        out = ""
        if self._peek() == "0" and self._peek(1) in "xX":
            out += self._advance() + self._advance()
            while self._peek() and self._peek() in "0123456789abcdefABCDEF_":
                out += self._advance()
            return out
        while self._peek() and self._peek() in "0123456789._eE":
            # stop at member access: `1.f` never occurs, but `x.length` does
            if self._peek() == "." and not self._peek(1).isdigit():
                break
            if self._peek() in "eE" and not (self._peek(1).isdigit()
                                             or self._peek(1) in "+-"):
                break
            out += self._advance()
            if out.endswith(("e", "E")) and self._peek() in "+-":
                out += self._advance()
        # unit suffixes (ether, days, ...) lex as separate identifiers
        return out

    def tokenize(self) -> list[Token]:
        tokens: list[Token] = []
        while True:
            self._skip_trivia()
            if self.pos >= len(self.text):
                break
            line, col, offset = self.line, self.col, self.pos
            ch = self._peek()

            if ch in "\"'":
                value = self._read_string()
                ttype = TokenType.STRING
            elif ch.isdigit():
                value = self._read_number()
                ttype = TokenType.NUMBER
            elif ch.isalpha() or ch in "_$":
                value = ""
                while self._peek() and (self._peek().isalnum()
                                        or self._peek() in "_$"):
                    value += self._advance()
                ttype = (TokenType.KEYWORD if value in KEYWORDS
                         else TokenType.IDENTIFIER)
            elif ch in _PUNCT:
                value = self._advance()
                ttype = _PUNCT[ch]
            else:
                for op in OPERATORS:
                    if self.text.startswith(op, self.pos):
                        for _ in op:
                            self._advance()
                        value = op
                        break
                else:
                    raise ParseError(f"unexpected character {ch!r}",
                                     self.file_id, self.line)
                ttype = TokenType.OPERATOR

            tokens.append(Token(ttype, value, line, col,
                                self.line, max(self.col - 1, 1),
                                offset, self.pos))
        tokens.append(Token(TokenType.EOF, "", self.line, self.col,
                            self.line, self.col, self.pos, self.pos))
        return tokens
