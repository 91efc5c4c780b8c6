import json
import math
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from pydantic import BaseModel


def to_jsonable(obj: Any) -> Any:
    """numpy / pydantic aware conversion; non-finite floats become None."""
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.model_dump(mode="json"))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def json_line(event: str, data: Dict[str, Any]) -> str:
    """One-line JSON event, the stderr counterpart of an SSE frame."""
    return json.dumps({"event": event, "data": to_jsonable(data)}, ensure_ascii=False)


def dumps(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), ensure_ascii=False, indent=2)


def write_json(path: Union[str, Path], payload: Any) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps(payload) + "\n", encoding="utf-8")
    return out
