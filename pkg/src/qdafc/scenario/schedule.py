"""Preparation / wait / storage-and-retrieval cycle with device states per phase."""

from __future__ import annotations

from dataclasses import dataclass

from ..detection import PhaseWindow


@dataclass(frozen=True)
class Phase:
    name: str
    start_ms: float
    duration_ms: float
    pump_open: bool
    detector_live: bool

    @property
    def end_ms(self) -> float:
        return self.start_ms + self.duration_ms


@dataclass(frozen=True)
class TimingSchedule:
    phases: tuple[Phase, ...]
    trial_period_ns: float

    def __post_init__(self):
        t = 0.0
        for ph in self.phases:
            if not ph.duration_ms > 0:
                raise ValueError(f"phase {ph.name} must have positive duration")
            if abs(ph.start_ms - t) > 1e-9:
                raise ValueError("phases must be contiguous")
            if ph.pump_open and ph.detector_live:
                raise ValueError(f"pump open while detector live in phase {ph.name}")
            t = ph.end_ms

    @property
    def cycle_ms(self) -> float:
        return self.phases[-1].end_ms

    @property
    def retrieval(self) -> Phase:
        return next(p for p in self.phases if p.name == "storage_retrieval")

    @property
    def live_fraction(self) -> float:
        return sum(p.duration_ms for p in self.phases if p.detector_live) / self.cycle_ms

    @property
    def trials_per_cycle(self) -> int:
        return int(round(self.retrieval.duration_ms * 1e6 / self.trial_period_ns))

    def pump_detector_exclusive(self) -> bool:
        return all(not (p.pump_open and p.detector_live) for p in self.phases)

    def retrieval_elapsed_ms(self, n_slices: int) -> list[float]:
        """Mid-points of ``n_slices`` equal slices of the retrieval phase, in ms after preparation ends."""
        prep_end = self.phases[0].end_ms
        r = self.retrieval
        return [r.start_ms - prep_end + (i + 0.5) * r.duration_ms / n_slices for i in range(n_slices)]

    def live_windows(self, n_cycles: int = 1) -> list[PhaseWindow]:
        out = []
        for c in range(n_cycles):
            base = c * self.cycle_ms
            for p in self.phases:
                if p.detector_live:
                    out.append(PhaseWindow((base + p.start_ms) * 1e6, (base + p.end_ms) * 1e6, True))
        return out


def build_schedule(config) -> TimingSchedule:
    tm = config.timing
    spec = [
        ("preparation", tm.preparation_ms, True, False),
        ("wait", tm.wait_ms, False, False),
        ("storage_retrieval", tm.retrieval_ms, False, True),
        ("wait", tm.final_wait_ms, False, False),
    ]
    phases, t = [], 0.0
    for name, dur, pump, live in spec:
        phases.append(Phase(name, t, dur, pump, live))
        t += dur
    return TimingSchedule(tuple(phases), config.pulses.period_ns)
