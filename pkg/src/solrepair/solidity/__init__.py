from .lexer import Lexer, Token, TokenType
from .parser import parse_source
from .project import ProjectAst, parse_project
from . import nodes

__all__ = ["Lexer", "Token", "TokenType", "parse_source", "parse_project",
           "ProjectAst", "nodes"]
