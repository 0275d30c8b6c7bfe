"""Run candidate scripts in a child interpreter with a timeout and capped capture.

This is process isolation only: no namespaces, seccomp or network policy.
Do not point it at code you would not run yourself.
"""

from __future__ import annotations

import os
import shlex
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

ENV_ALLOWLIST = ("PATH", "LANG", "LC_ALL", "LC_CTYPE", "SYSTEMROOT", "TMPDIR")

_slots_lock = threading.Lock()
_slots: dict[int, threading.BoundedSemaphore] = {}


def _semaphore(limit: int) -> threading.BoundedSemaphore:
    with _slots_lock:
        if limit not in _slots:
            _slots[limit] = threading.BoundedSemaphore(limit)
        return _slots[limit]


@dataclass(frozen=True)
class ExecutionResult:
    status: str  # ok | nonzero_exit | timeout | spawn_error
    stdout: str = ""
    stderr: str = ""
    wall_time: float = 0.0
    exit_code: Optional[int] = None
    stdout_truncated: bool = False
    stderr_truncated: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class SandboxConfig:
    interpreter_cmd: Union[str, Sequence[str]] = field(default_factory=lambda: [sys.executable, "-I"])
    timeout_s: float = 30.0
    capture_bytes: int = 64 * 1024
    max_concurrent: int = 8

    def __post_init__(self) -> None:
        if isinstance(self.interpreter_cmd, str):
            self.interpreter_cmd = shlex.split(self.interpreter_cmd)
        else:
            self.interpreter_cmd = list(self.interpreter_cmd)
        if not self.interpreter_cmd:
            raise ValueError("interpreter_cmd is empty")
        if self.timeout_s <= 0 or self.capture_bytes <= 0 or self.max_concurrent <= 0:
            raise ValueError("sandbox limits must be positive")


def _read_capped(path: Path, limit: int) -> tuple[str, bool]:
    with path.open("rb") as fh:
        data = fh.read(limit + 1)
    truncated = len(data) > limit
    return data[:limit].decode("utf-8", errors="replace"), truncated


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass


def execute(code: str, config: Optional[SandboxConfig] = None, *, timeout_s: Optional[float] = None,
            capture_bytes: Optional[int] = None) -> ExecutionResult:
    """Run ``code`` and classify the outcome; script failures are returned, never raised."""
    cfg = config or SandboxConfig()
    timeout = timeout_s if timeout_s is not None else cfg.timeout_s
    cap = capture_bytes if capture_bytes is not None else cfg.capture_bytes
    cmd = list(cfg.interpreter_cmd)
    if shutil.which(cmd[0]) is None:
        return ExecutionResult("spawn_error", stderr=f"interpreter not found: {cmd[0]}")

    env = {k: os.environ[k] for k in ENV_ALLOWLIST if k in os.environ}
    with _semaphore(cfg.max_concurrent):
        try:
            workdir = Path(tempfile.mkdtemp(prefix="mctsops_exec_"))
        except OSError as exc:
            return ExecutionResult("spawn_error", stderr=f"workspace unavailable: {exc}")
        try:
            script = workdir / "candidate.py"
            script.write_text(code, encoding="utf-8")
            out_path, err_path = workdir / "stdout.txt", workdir / "stderr.txt"
            start = time.monotonic()
            with out_path.open("wb") as out, err_path.open("wb") as err:
                try:
                    proc = subprocess.Popen(
                        cmd + [script.name],
                        cwd=workdir,
                        env=env,
                        stdin=subprocess.DEVNULL,
                        stdout=out,
                        stderr=err,
                        start_new_session=True,
                    )
                except OSError as exc:
                    return ExecutionResult("spawn_error", stderr=str(exc))
                timed_out = False
                try:
                    proc.wait(timeout=timeout)
                except subprocess.TimeoutExpired:
                    timed_out = True
                # the group kill also reaps helpers a finished script left running
                _kill_group(proc)
                proc.wait()
            wall = time.monotonic() - start
            stdout, out_trunc = _read_capped(out_path, cap)
            stderr, err_trunc = _read_capped(err_path, cap)
            # tracebacks name the random workspace; drop it so identical scripts give identical stderr
            prefix = f"{workdir}{os.sep}"
            stdout, stderr = stdout.replace(prefix, ""), stderr.replace(prefix, "")
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    if timed_out:
        status, code_ = "timeout", None
    else:
        code_ = proc.returncode
        status = "ok" if code_ == 0 else "nonzero_exit"
    return ExecutionResult(status, stdout, stderr, wall, code_, out_trunc, err_trunc)


class CachedExecutor:
    """Memoizes results of deterministic scripts by exact source text."""

    def __init__(self, config: Optional[SandboxConfig] = None) -> None:
        self.config = config or SandboxConfig()
        self._cache: dict[str, ExecutionResult] = {}
        self._lock = threading.Lock()
        self.hits = 0

    def __call__(self, code: str) -> ExecutionResult:
        with self._lock:
            hit = self._cache.get(code)
            if hit is not None:
                self.hits += 1
                return hit
        result = execute(code, self.config)
        if result.status != "spawn_error":
            with self._lock:
                self._cache[code] = result
        return result
