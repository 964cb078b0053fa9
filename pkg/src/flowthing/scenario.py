from __future__ import annotations

from dataclasses import dataclass, field


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class TimeMachine:
    period: int
    slice_count: int
    targets: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.period < 1:
            raise ScenarioError("time machine period must be >= 1")
        if self.slice_count < 1:
            raise ScenarioError("time machine slice count must be >= 1")
        if not self.targets:
            raise ScenarioError("time machine needs at least one target event")

    def slices(self) -> list[int]:
        return [k * self.period for k in range(self.slice_count)]


@dataclass(frozen=True)
class Scenario:
    """Simulation inputs. Injection paths stay unresolved until simulate."""

    injections: tuple[tuple[str, int], ...] = ()
    time_machine: TimeMachine | None = None
    max_ticks: int = 1
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "injections", tuple((p, int(t)) for p, t in self.injections))
        if self.max_ticks < 1:
            raise ScenarioError("max_ticks must be >= 1")
        for path, tick in self.injections:
            if tick < 0:
                raise ScenarioError(f"injection {path} @ {tick}: tick must be >= 0")
            if tick >= self.max_ticks:
                raise ScenarioError(f"injection {path} @ {tick}: tick must be < max_ticks ({self.max_ticks})")
        tm = self.time_machine
        if tm is not None and tm.slice_count * tm.period > self.max_ticks:
            raise ScenarioError(
                f"time machine needs {tm.slice_count * tm.period} ticks but max_ticks is {self.max_ticks}"
            )
