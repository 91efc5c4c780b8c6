from typing import Any, Callable, Dict, List, Optional
import time

Emit = Callable[[str, Dict[str, Any]], None]


class StageLogger:
    """Collects `area:step` stage events and forwards them to an optional sink."""

    def __init__(
        self,
        emit: Optional[Emit] = None,
        prefix: str = "",
        events: Optional[List[Dict[str, Any]]] = None,
        t0: Optional[float] = None,
    ):
        self.events: List[Dict[str, Any]] = events if events is not None else []
        self.emit = emit
        self.prefix = prefix
        self.t0 = time.time() if t0 is None else t0

    def stage(self, name: str, payload: Dict[str, Any]):
        name = f"{self.prefix}{name}"
        evt = {
            "time": time.time() - self.t0,
            "stage": name,
            "data": payload,
        }
        self.events.append(evt)
        if self.emit:
            try:
                self.emit(name, evt)
            except Exception:
                pass

    def child(self, prefix: str) -> "StageLogger":
        """Logger writing into this one's events and sink with names prefixed, e.g. `trial:3:`."""
        return StageLogger(self.emit, prefix=f"{self.prefix}{prefix}", events=self.events, t0=self.t0)

    def names(self) -> List[str]:
        return [evt["stage"] for evt in self.events]
