"""Figure specifications and the flat spec-file format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

FIGURE_KINDS = ("errors", "hip", "control", "energy")


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: one figure family from one trace file.

    The time window defaults to the whole trace; double-support intervals
    from the trace's phase column are shaded unless disabled.
    """

    figure: str
    trace: Path
    out: Path
    t_min: float | None = None
    t_max: float | None = None
    shade: bool = True

    def __post_init__(self):
        if self.figure not in FIGURE_KINDS:
            raise SpecError(
                f"unknown figure kind {self.figure!r}; expected one of {FIGURE_KINDS}"
            )
        if self.t_min is not None and self.t_max is not None and self.t_max < self.t_min:
            raise SpecError("time window is reversed")


def parse_spec_text(text: str, base_dir: Path | None = None) -> FigureSpec:
    """Parse a `key = value` spec file (one figure per file, # comments)."""
    base = base_dir or Path(".")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    try:
        figure = values.pop("figure")
        trace = base / values.pop("trace")
        out = base / values.pop("out")
    except KeyError as exc:
        raise SpecError(f"missing required key {exc.args[0]!r}")
    t_min = float(values.pop("t_min")) if "t_min" in values else None
    t_max = float(values.pop("t_max")) if "t_max" in values else None
    shade = values.pop("shade", "ds").lower() not in ("none", "off", "false")
    if values:
        raise SpecError(f"unknown keys: {sorted(values)}")
    return FigureSpec(figure=figure, trace=trace, out=out,
                      t_min=t_min, t_max=t_max, shade=shade)


def load_spec(path: str | Path) -> FigureSpec:
    p = Path(path)
    return parse_spec_text(p.read_text(), base_dir=p.parent)
