"""Whole-project parsing: discover ``.sol`` files, parse each, resolve imports.

Import resolution order: remappings first, then relative to the importing
file, then relative to the project root. Unresolved imports are recorded,
never fatal; per-file parse failures abort the project only when nothing
parsed at all.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ParseError, ProjectError
from ..source import SourceFile, normalize_rel_path
from .nodes import Ast, ContractDecl
from .parser import parse_source


@dataclass(frozen=True)
class Remapping:
    prefix: str
    target: str

    @classmethod
    def parse(cls, text: str) -> "Remapping":
        prefix, sep, target = text.partition("=")
        if not sep or not prefix:
            raise ProjectError(f"bad remapping {text!r}, expected prefix=path")
        return cls(prefix, target)


@dataclass
class ProjectAst:
    root: str
    files: list[SourceFile]
    asts: list[Ast]
    remaps: list[Remapping]
    # (importing file path, import text) -> resolved project path or None
    import_table: dict[tuple[str, str], str | None] = field(
        default_factory=dict)
    parse_failures: list[tuple[str, ParseError]] = field(default_factory=list)

    def file_by_path(self, path: str) -> SourceFile | None:
        for f in self.files:
            if f.path == path:
                return f
        return None

    def file_by_id(self, file_id: int) -> SourceFile:
        return self.files[file_id]

    def iter_contracts(self):
        """Yield (SourceFile, ContractDecl) over the whole project."""
        for source, ast in zip(self.files, self.asts):
            for contract in ast.contracts:
                yield source, contract

    def find_contract(self, name: str) -> ContractDecl | None:
        for _, contract in self.iter_contracts():
            if contract.name == name:
                return contract
        return None


def _resolve_import(import_path: str, importer: str, root: Path,
                    remaps: list[Remapping],
                    known: set[str]) -> str | None:
    candidates: list[str] = []
    for remap in remaps:
        if import_path.startswith(remap.prefix):
            candidates.append(remap.target + import_path[len(remap.prefix):])
    importer_dir = "/".join(importer.split("/")[:-1])
    if importer_dir:
        candidates.append(f"{importer_dir}/{import_path}")
    else:
        candidates.append(import_path)
    candidates.append(import_path)
    for candidate in candidates:
        norm = normalize_rel_path(candidate)
        if norm in known:
            return norm
    return None


def parse_project(root: str | Path,
                  remaps: list[str] | list[Remapping] | None = None
                  ) -> ProjectAst:
    """Parse every ``.sol`` file under ``root``.

    Raises :class:`ProjectError` when the directory has no Solidity sources
    or when every file fails to parse.
    """
    root = Path(root)
    if not root.is_dir():
        raise ProjectError(f"project root {root} is not a directory")
    remap_list = [r if isinstance(r, Remapping) else Remapping.parse(r)
                  for r in (remaps or [])]

    sol_paths = sorted(p for p in root.rglob("*.sol") if p.is_file())
    if not sol_paths:
        raise ProjectError(f"no Solidity sources found under {root}")

    files: list[SourceFile] = []
    asts: list[Ast] = []
    failures: list[tuple[str, ParseError]] = []
    for path in sol_paths:
        rel = normalize_rel_path(str(path.relative_to(root)))
        file_id = len(files)
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            failures.append((rel, ParseError(f"not valid UTF-8: {exc}")))
            continue
        source = SourceFile(rel, text, file_id)
        try:
            asts.append(parse_source(source))
        except ParseError as exc:
            exc.file_id = file_id
            failures.append((rel, exc))
            continue
        files.append(source)

    if not files:
        raise ProjectError(
            "every Solidity source failed to parse: "
            + "; ".join(f"{p}: {e}" for p, e in failures),
            failures=failures)

    known = {f.path for f in files}
    project = ProjectAst(str(root), files, asts, remap_list,
                         parse_failures=failures)
    for source, ast in zip(files, asts):
        for imp in ast.imports:
            resolved = _resolve_import(imp.path, source.path, root,
                                       remap_list, known)
            project.import_table[(source.path, imp.path)] = resolved
    return project
