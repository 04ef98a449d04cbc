"""Invoking an external Solidity compiler to sanity-check a project tree.

The check is advisory: when no compiler is configured or discoverable the
status is ``skipped`` and the pipeline records it as such instead of
failing.
"""
from __future__ import annotations

import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CompilerMissing


@dataclass
class CompilerConfig:
    solc_path: str | None = None  # None: use `solc` from PATH if present
    remaps: list[str] = field(default_factory=list)
    extra_args: list[str] = field(default_factory=list)
    timeout: float = 120.0


@dataclass
class CompileResult:
    status: str  # "ok" | "failed" | "skipped"
    diagnostics: str = ""

    @property
    def ok(self) -> bool | None:
        if self.status == "skipped":
            return None
        return self.status == "ok"


def compile_check(project_dir: str | Path,
                  config: CompilerConfig | None = None) -> CompileResult:
    """Run the compiler over every ``.sol`` file under ``project_dir``.

    Raises :class:`CompilerMissing` when an explicitly configured
    executable does not exist; returns ``skipped`` when none was
    configured and none is on PATH.
    """
    config = config or CompilerConfig()
    project_dir = Path(project_dir)

    if config.solc_path:
        executable = config.solc_path
        if shutil.which(executable) is None \
                and not Path(executable).exists():
            raise CompilerMissing(f"compiler not found: {executable}")
    else:
        executable = shutil.which("solc")
        if executable is None:
            return CompileResult("skipped",
                                 "no Solidity compiler configured or found "
                                 "on PATH")

    sources = sorted(str(p.relative_to(project_dir))
                     for p in project_dir.rglob("*.sol"))
    if not sources:
        return CompileResult("failed", f"no .sol files under {project_dir}")

    command = [executable, *config.remaps, *config.extra_args, *sources]
    try:
        proc = subprocess.run(command, cwd=project_dir,
                              capture_output=True, text=True,
                              timeout=config.timeout)
    except subprocess.TimeoutExpired:
        return CompileResult("failed",
                             f"compiler timed out after {config.timeout}s")
    except OSError as exc:
        raise CompilerMissing(f"could not execute {executable}: {exc}")

    diagnostics = (proc.stdout + proc.stderr).strip()
    return CompileResult("ok" if proc.returncode == 0 else "failed",
                         diagnostics)
