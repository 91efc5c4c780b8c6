from pathlib import Path
from typing import Dict, List, Tuple, Union

from crowdagg.core.errors import DuplicateResponse, GradeOutOfRange, MalformedRow, UnknownCondition
from crowdagg.domain.dataset import RatingDataset, Response
from crowdagg.domain.schemas import Condition

HEADER = ("worker_id", "target_id", "criterion_id", "grade", "condition")

PathLike = Union[str, Path]


def parse_row(line: str, lineno: int) -> Response:
    fields = line.split(",")
    if len(fields) != len(HEADER):
        raise MalformedRow(f"expected {len(HEADER)} columns, got {len(fields)}", line=lineno)
    worker_id, target_id, criterion_id, grade_raw, condition_raw = fields
    if not worker_id or not target_id or not criterion_id:
        raise MalformedRow("empty id", line=lineno)
    try:
        grade = int(grade_raw)
    except ValueError:
        raise MalformedRow(f"grade {grade_raw!r} is not an integer", line=lineno) from None
    if not 1 <= grade <= 5:
        raise GradeOutOfRange(f"grade {grade} outside 1..5", line=lineno)
    try:
        condition = Condition(condition_raw)
    except ValueError:
        raise UnknownCondition(f"condition {condition_raw!r} is not INDV or SIMUL", line=lineno) from None
    return Response(
        worker_id=worker_id,
        target_id=target_id,
        criterion_id=criterion_id,
        grade=grade,
        condition=condition,
    )


def parse_text(text: str) -> RatingDataset:
    """Parse the ratings CSV schema. LF and CRLF endings both work; blank lines are skipped."""
    lines = text.splitlines()
    if not lines or lines[0].lstrip("\ufeff") != ",".join(HEADER):
        raise MalformedRow(f"header must be exactly {','.join(HEADER)}", line=1)
    responses: List[Response] = []
    first_seen: Dict[Tuple[str, str, str, Condition], int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        r = parse_row(line, lineno)
        if r.key in first_seen:
            raise DuplicateResponse(
                f"duplicate of line {first_seen[r.key]} "
                f"(worker={r.worker_id} target={r.target_id} criterion={r.criterion_id} condition={r.condition.value})",
                line=lineno,
            )
        first_seen[r.key] = lineno
        responses.append(r)
    if not responses:
        raise MalformedRow("file contains no responses", line=1)
    return RatingDataset.from_responses(responses)


def load_csv(path: PathLike) -> RatingDataset:
    return parse_text(Path(path).read_text(encoding="utf-8"))


def dump_text(ds: RatingDataset) -> str:
    rows = [",".join(HEADER)]
    rows.extend(
        f"{r.worker_id},{r.target_id},{r.criterion_id},{r.grade},{r.condition.value}"
        for r in ds.responses
    )
    return "\n".join(rows) + "\n"


def save_csv(ds: RatingDataset, path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_text(ds))
    return out
