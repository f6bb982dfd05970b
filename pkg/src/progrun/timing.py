"""Online steps-per-second model used to size each run_step call.

The model is a least-squares fit through the origin over a short window of
recent (steps, duration) pairs: duration = steps / rate.  Keeping the window
short makes the fitted rate track the *local* processing speed, so modules
with super-linear cost see shrinking step counts as their data grows.
"""

import random

CALIBRATION_RANGE = (800, 1200)
_WINDOW = 8
_MIN_HISTORY = 3
_RECENT = 3  # sub-window used when the local rate diverges from the window fit
_DIVERGENCE = 0.30
_OVERSHOOT_FACTOR = 10
_EPS = 1e-9


def _fit_rate(pairs) -> float:
    """Least squares through the origin: minimize sum (t - s/rate)^2."""
    ss = sum(s * s for s, _ in pairs)
    st = sum(s * t for s, t in pairs)
    return ss / max(st, _EPS)


class TimePredictor:
    """Maps a time budget to a step count for one module."""

    def __init__(self, seed=None, window: int = _WINDOW):
        self._history: list = []  # (steps, duration), newest last
        self._window = window
        self._rate = None
        self._rng = random.Random(seed)

    @property
    def calibrated(self) -> bool:
        return self._rate is not None

    @property
    def rate(self):
        """Fitted steps per second, or None before calibration."""
        return self._rate

    @property
    def history_len(self) -> int:
        return len(self._history)

    def initial_steps(self) -> int:
        """Calibration step count, jittered uniformly over 800..1200."""
        return self._rng.randint(*CALIBRATION_RANGE)

    def record(self, steps_run: int, duration: float) -> None:
        """Add one observation and refit; zero-step observations are ignored."""
        if duration < 0:
            raise ValueError("duration must be >= 0")
        if steps_run <= 0:
            return
        self._history.append((int(steps_run), float(duration)))
        if len(self._history) > self._window:
            del self._history[: len(self._history) - self._window]
        if len(self._history) >= _MIN_HISTORY:
            full = _fit_rate(self._history)
            recent = _fit_rate(self._history[-_RECENT:])
            # a diverging recent fit means the module's local cost shifted;
            # the stale part of the window would lag it for several runs
            if abs(recent - full) / max(full, _EPS) > _DIVERGENCE:
                self._rate = recent
            else:
                self._rate = full

    def predict(self, budget_seconds: float) -> int:
        """Step count expected to fit in the budget; never returns 0."""
        if budget_seconds <= 0:
            raise ValueError("budget must be > 0")
        if self._rate is None:
            return self.initial_steps()
        steps = max(int(self._rate * budget_seconds), 1)
        cap = _OVERSHOOT_FACTOR * max(s for s, _ in self._history)
        return min(steps, cap)
