"""CSV/JSON emission for runs: figure-ready data plus a manifest per run.

Data files (CSV, RFC 4180; JSON summaries) are bit-deterministic for a given
(seed, config) regardless of worker count.  The manifest carries provenance
(config snapshot, seed, version, outputs, wall clock) and is the one file
allowed to differ between reruns.
"""

from __future__ import annotations

import csv
import json
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .config import FeedbackConfig, SimConfig
from .sme import TrajectoryRecord

MANIFEST_NAME = "manifest.json"


def version_string() -> str:
    """Package version, refined by `git describe` when run from a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5.0,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def config_snapshot(sim: SimConfig, fb: FeedbackConfig) -> dict:
    return {
        "sim": {
            "gamma_per_us": sim.gamma,
            "omega_rad_per_us": sim.omega_r,
            "eta": sim.eta,
            "dt_us": sim.dt,
            "tau_us": sim.tau,
            "phi": sim.phi,
            "seed": sim.seed,
            "initial_state": sim.initial_state,
            "beta": sim.beta,
            "scheme": sim.scheme,
            "sample_final": sim.sample_final,
        },
        "feedback": {
            "mode": fb.mode,
            "gain": fb.gain,
            "offset": fb.offset,
            "phi": fb.phi,
            "delay_steps": fb.delay_steps,
        },
    }


@dataclass
class RunManifest:
    """Provenance record written next to every command's outputs."""

    command: str
    config: dict
    seed: int
    outputs: list[str] = field(default_factory=list)
    version: str = field(default_factory=version_string)
    n_steps: int = 0
    n_traj: int = 0
    wall_seconds: float = 0.0

    def write(self, out_dir: Path) -> Path:
        path = out_dir / MANIFEST_NAME
        payload = {
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "n_steps": self.n_steps,
            "n_traj": self.n_traj,
            "wall_seconds": round(self.wall_seconds, 3),
            "outputs": self.outputs,
            "config": self.config,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        return False


def timer() -> _Timer:
    return _Timer()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_trajectory_csv(record: TrajectoryRecord, path: Path) -> None:
    """One row per step: time at step end, post-step state, step increments."""
    rows = (
        (
            float(record.times[i + 1]),
            float(record.x[i + 1]),
            float(record.z[i + 1]),
            float(record.dv[i]),
            float(record.dw[i]),
            float(record.dwf[i]),
            float(record.dq[i]),
            float(record.du[i]),
        )
        for i in range(record.n_steps)
    )
    write_csv(path, ("t", "x", "z", "dV", "dW", "dWF", "dQ", "dU"), rows)


def write_trajectory_sidecar(record: TrajectoryRecord, path: Path) -> None:
    payload = config_snapshot(record.config, record.feedback)
    payload["initial_label"] = record.initial_label
    payload["final_outcome"] = record.final_outcome
    payload["manifest"] = MANIFEST_NAME
    write_json(path, payload)
