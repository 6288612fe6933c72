"""Rep validation state machine.

A two-phase machine consumes per-frame kinematic features. In IDLE it arms
when every rep-start constraint holds for ``debounce`` consecutive frames;
while ACTIVE it accumulates requirement satisfaction (satisfied at least
once) and no-rep violations (violated at least once); when every rep-end
constraint holds for ``debounce`` consecutive frames it emits a record
anchored at the first frame of each debounce window and resets.

A rep is valid iff every requirement was satisfied and no no-rep condition
triggered. Features unavailable on a frame never satisfy a constraint.

Reps shorter than ``min_rep_duration`` frames are discarded as noise: the
start and end poses of many movements coincide (stand-to-stand), which
would otherwise produce zero-length reps on every held start pose. When a
short rep is discarded while the start predicate still holds, the machine
stays ACTIVE and slides its start anchor to the discarded end anchor
(ledgers cleared); that keeps it armed through a held start pose, so the
next genuine movement phase is judged from the most recent start evidence.
Without the slide the machine would sit IDLE when the movement begins and
miss the rep entirely. A stream that ends mid-rep yields an invalid record
flagged ``incomplete_rep``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigurationError, MissingFeatureError, UnitMismatchError
from .features import KinematicFeatures, evaluate_constraint
from .rules import MovementRuleSet, NamedConstraint

DEFAULT_ANGLE_TOLERANCE = 5.0
DEFAULT_POSITION_TOLERANCE = 0.05
DEFAULT_DEBOUNCE = 2
DEFAULT_MIN_REP_DURATION = 5
INCOMPLETE_REP = "incomplete_rep"


class Phase(enum.Enum):
    IDLE = "idle"
    ACTIVE = "active"


class RepLabel(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"


@dataclass(frozen=True)
class ThresholdConfig:
    """Numeric tolerances driving start/requirement/end tests, tuned per
    (pose model, movement, camera view)."""

    angle_tolerance: float = DEFAULT_ANGLE_TOLERANCE
    position_tolerance: float = DEFAULT_POSITION_TOLERANCE
    overrides: dict[str, float] = field(default_factory=dict)
    debounce: int = DEFAULT_DEBOUNCE
    conf_floor: float = 0.3
    min_rep_duration: int = DEFAULT_MIN_REP_DURATION
    include_end_frame_requirements: bool = True

    def __post_init__(self):
        if self.angle_tolerance < 0 or self.position_tolerance < 0:
            raise ConfigurationError("tolerances must be non-negative")
        if self.debounce < 1:
            raise ConfigurationError("debounce must be >= 1")
        if not 0.0 <= self.conf_floor <= 1.0:
            raise ConfigurationError("conf_floor must lie in [0, 1]")
        if self.min_rep_duration < 1:
            raise ConfigurationError("min_rep_duration must be >= 1")

    def to_dict(self) -> dict:
        return {
            "angle_tolerance": self.angle_tolerance,
            "position_tolerance": self.position_tolerance,
            "overrides": dict(self.overrides),
            "debounce": self.debounce,
            "conf_floor": self.conf_floor,
            "min_rep_duration": self.min_rep_duration,
            "include_end_frame_requirements": self.include_end_frame_requirements,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ThresholdConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in obj.items() if k in known})


@dataclass(frozen=True)
class RepRecord:
    t_start: int
    t_end: int
    label: RepLabel
    failed_requirements: tuple[str, ...] = ()
    triggered_no_reps: tuple[str, ...] = ()

    def __post_init__(self):
        if self.t_start > self.t_end:
            raise ConfigurationError("rep must satisfy t_start <= t_end")
        consistent = (self.label is RepLabel.VALID) == (
            not self.failed_requirements and not self.triggered_no_reps
        )
        if not consistent:
            raise ConfigurationError("label must reflect the failure lists")

    def to_dict(self) -> dict:
        return {
            "start": self.t_start,
            "end": self.t_end,
            "label": self.label.value,
            "failed": list(self.failed_requirements),
            "no_reps": list(self.triggered_no_reps),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RepRecord":
        return cls(
            t_start=int(obj["start"]),
            t_end=int(obj["end"]),
            label=RepLabel(obj["label"]),
            failed_requirements=tuple(obj.get("failed", ())),
            triggered_no_reps=tuple(obj.get("no_reps", ())),
        )


@dataclass
class ValidatorState:
    phase: Phase = Phase.IDLE
    t_start: Optional[int] = None
    start_run: int = 0
    end_run: int = 0
    requirements_met: set[str] = field(default_factory=set)
    no_reps_triggered: set[str] = field(default_factory=set)
    partial_start_seen: bool = False
    # Diagnostics
    unavailable_feature_frames: int = 0
    suppressed_short_reps: int = 0


class RepValidator:
    """Stateful per-stream judge over kinematic feature frames."""

    def __init__(self, rules: MovementRuleSet, thresholds: ThresholdConfig):
        self.rules = rules
        self.thresholds = thresholds
        self.state = ValidatorState()
        self._last_frame: Optional[int] = None

    def _holds(self, constraint: NamedConstraint, features: KinematicFeatures) -> bool:
        try:
            return evaluate_constraint(constraint, features, self.thresholds)
        except MissingFeatureError:
            self.state.unavailable_feature_frames += 1
            return False
        except UnitMismatchError:
            raise

    def _all_hold(self, group, features) -> bool:
        return all(self._holds(c, features) for c in group)

    def step(self, frame_index: int, features: KinematicFeatures) -> Optional[RepRecord]:
        """Advance one frame; returns a finished RepRecord when a rep ends."""
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise ConfigurationError("frames must be fed in strictly increasing order")
        self._last_frame = frame_index
        st = self.state
        record = None

        if st.phase is Phase.IDLE:
            if any(self._holds(c, features) for c in self.rules.rep_requirements):
                st.partial_start_seen = True
            if self._all_hold(self.rules.rep_start, features):
                st.start_run += 1
            else:
                st.start_run = 0
            if st.start_run >= self.thresholds.debounce:
                st.phase = Phase.ACTIVE
                st.t_start = frame_index - self.thresholds.debounce + 1
                st.start_run = 0
                st.requirements_met = set()
                st.no_reps_triggered = set()
                st.end_run = 0

        if st.phase is Phase.ACTIVE:
            end_now = self._all_hold(self.rules.rep_end, features)
            if self.thresholds.include_end_frame_requirements or not end_now:
                for c in self.rules.rep_requirements:
                    if self._holds(c, features):
                        st.requirements_met.add(c.semantic_key)
                for c in self.rules.no_rep_conditions:
                    if self._holds(c, features):
                        st.no_reps_triggered.add(c.semantic_key)
            if end_now:
                st.end_run += 1
            else:
                st.end_run = 0
            if st.end_run >= self.thresholds.debounce:
                t_end = frame_index - self.thresholds.debounce + 1
                if t_end - st.t_start + 1 < self.thresholds.min_rep_duration:
                    st.suppressed_short_reps += 1
                    if self._all_hold(self.rules.rep_start, features):
                        # Re-arm in place: slide the start anchor forward and
                        # keep watching (end_run keeps counting, so the anchor
                        # tracks a held start pose frame by frame).
                        st.t_start = t_end
                        st.requirements_met = set()
                        st.no_reps_triggered = set()
                    else:
                        self._reset()
                else:
                    record = self._emit(t_end)
        return record

    def _emit(self, t_end: int) -> RepRecord:
        st = self.state
        t_start = st.t_start
        failed = tuple(
            c.semantic_key
            for c in self.rules.rep_requirements
            if c.semantic_key not in st.requirements_met
        )
        triggered = tuple(
            c.semantic_key
            for c in self.rules.no_rep_conditions
            if c.semantic_key in st.no_reps_triggered
        )
        self._reset()
        label = RepLabel.VALID if not failed and not triggered else RepLabel.INVALID
        return RepRecord(
            t_start=t_start,
            t_end=t_end,
            label=label,
            failed_requirements=failed,
            triggered_no_reps=triggered,
        )

    def _reset(self) -> None:
        st = self.state
        st.phase = Phase.IDLE
        st.t_start = None
        st.start_run = 0
        st.end_run = 0
        st.requirements_met = set()
        st.no_reps_triggered = set()

    def finalize(self, last_frame: Optional[int] = None) -> Optional[RepRecord]:
        """Close the stream; an in-flight rep becomes an invalid partial.

        Partials shorter than ``min_rep_duration`` are discarded like any
        other short rep (an armed machine holding the start pose at stream
        end is not a movement attempt).
        """
        st = self.state
        if st.phase is not Phase.ACTIVE:
            return None
        if last_frame is None:
            last_frame = self._last_frame
        t_start = st.t_start
        if max(last_frame, t_start) - t_start + 1 < self.thresholds.min_rep_duration:
            st.suppressed_short_reps += 1
            self._reset()
            return None
        failed = tuple(
            c.semantic_key
            for c in self.rules.rep_requirements
            if c.semantic_key not in st.requirements_met
        )
        triggered = tuple(
            c.semantic_key
            for c in self.rules.no_rep_conditions
            if c.semantic_key in st.no_reps_triggered
        ) + (INCOMPLETE_REP,)
        self._reset()
        return RepRecord(
            t_start=t_start,
            t_end=max(last_frame, t_start),
            label=RepLabel.INVALID,
            failed_requirements=failed,
            triggered_no_reps=triggered,
        )
