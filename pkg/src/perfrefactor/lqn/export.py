"""Indented text dump of an LQN, for debugging.

Grammar (two-space indentation per level)::

    lqnmodel <name>
    processor <id> multiplicity=<int> speed=<float>
      task <id> kind=server multiplicity=<int>
        entry <id>
          activity <id> demand=<float>
            call <entry-id> mean=<float>
    clients
      task <id> kind=reference multiplicity=<int> think=<float>
        entry ...
"""

from __future__ import annotations

from pathlib import Path

from .model import LqnModel, Task


def _task_lines(lqn: LqnModel, task: Task, indent: str) -> list[str]:
    head = f"{indent}task {task.id} kind={task.kind} multiplicity={task.multiplicity}"
    if task.is_reference:
        head += f" think={task.think_time:.6g}"
    lines = [head]
    for eid in lqn.entries_of[task.id]:
        lines.append(f"{indent}  entry {eid}")
        for act in lqn.activities_of[eid]:
            lines.append(f"{indent}    activity {act.id} demand={act.host_demand:.6g}")
            for c in act.calls:
                lines.append(f"{indent}      call {c.target} mean={c.mean_calls:.6g}")
    return lines


def dumps(lqn: LqnModel) -> str:
    lines = [f"lqnmodel {lqn.name}"]
    for p in lqn.processors:
        lines.append(f"processor {p.id} multiplicity={p.multiplicity} speed={p.speed_factor:.6g}")
        for t in lqn.server_tasks:
            if t.processor == p.id:
                lines.extend(_task_lines(lqn, t, "  "))
    lines.append("clients")
    for t in lqn.reference_tasks:
        lines.extend(_task_lines(lqn, t, "  "))
    return "\n".join(lines) + "\n"


def dump(lqn: LqnModel, directory: str | Path, stem: str | None = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem or lqn.name}.lqn.txt"
    path.write_text(dumps(lqn), encoding="utf-8")
    return path
