import time
import warnings
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

from crowdagg import __version__
from crowdagg.core.errors import CrowdAggError
from crowdagg.domain.dataset import RatingDataset
from crowdagg.domain.schemas import (
    Condition,
    GroupingReport,
    MomentRecord,
    ReportMetadata,
    StatReport,
    TestName,
    TestOutcome,
    TestResult,
)
from crowdagg.parsers.ratings_csv import load_csv
from crowdagg.services.logging import StageLogger
from crowdagg.services.moments import (
    Grouping,
    grade_distribution,
    inter_criteria_moments,
    inter_target_moments,
    summarize_moments,
)
from crowdagg.services.stat_tests import brunner_munzel_test, f_test_two_sided, welch_t_test
from crowdagg.utils.jsonio import write_json

GROUPINGS: Dict[Grouping, Callable[[RatingDataset, Condition], List[MomentRecord]]] = {
    "inter_target": inter_target_moments,
    "inter_criteria": inter_criteria_moments,
}

# (distribution, test) pairs run for each grouping, INDV as sample a and SIMUL as sample b
TESTS = [
    ("mean", TestName.FTwoSided, f_test_two_sided),
    ("variance", TestName.WelchT, welch_t_test),
    ("variance", TestName.BrunnerMunzel, brunner_munzel_test),
]


def as_condition(ds: RatingDataset, condition: Condition, logger: Optional[StageLogger] = None) -> RatingDataset:
    """The `condition` rows of ds; a file without any is taken whole and relabelled."""
    logger = logger or StageLogger()
    if condition in ds.conditions:
        return ds.where(condition)
    logger.stage("analysis:relabel", {"condition": condition.value, "from": [c.value for c in ds.conditions]})
    return RatingDataset.from_responses(
        (r.model_copy(update={"condition": condition}) for r in ds.responses), values=ds.values
    )


def _run_test(
    fn: Callable[[Sequence[float], Sequence[float]], TestResult],
    a: Sequence[float],
    b: Sequence[float],
    logger: StageLogger,
    name: str,
) -> TestResult:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = fn(a, b)
    for w in caught:
        logger.stage("analysis:test:warning", {"name": name, "warning": str(w.message)})
    return result


def bias_analysis(
    indv: RatingDataset,
    simul: RatingDataset,
    alpha: float = 0.01,
    logger: Optional[StageLogger] = None,
) -> StatReport:
    """Compare INDV against SIMUL responses on inter-target and inter-criteria moments.

    Mean distributions go through the two-sided F test, variance distributions
    through Welch's t and Brunner-Munzel. A test that cannot be computed is
    kept in the report with its error instead of a result.
    """
    logger = logger or StageLogger()
    started_at = time.time()
    arms = {
        Condition.INDV: as_condition(indv, Condition.INDV, logger),
        Condition.SIMUL: as_condition(simul, Condition.SIMUL, logger),
    }
    logger.stage("analysis:start", {c.value: len(ds) for c, ds in arms.items()})

    dist = {c.value: grade_distribution(ds, c).tolist() for c, ds in arms.items()}

    moments: List[GroupingReport] = []
    distributions: Dict[str, Dict[str, Dict[str, List[float]]]] = {}
    tests: List[TestOutcome] = []
    for grouping, moments_fn in GROUPINGS.items():
        records = {c: moments_fn(ds, c) for c, ds in arms.items()}
        moments.append(GroupingReport(
            grouping=grouping,
            indv=summarize_moments(records[Condition.INDV]),
            simul=summarize_moments(records[Condition.SIMUL]),
        ))
        distributions[grouping] = {
            c.value: {
                "means": [rec.mean for rec in recs],
                "variances": [rec.variance for rec in recs],
            }
            for c, recs in records.items()
        }
        logger.stage("analysis:moments", {"grouping": grouping, **{c.value: len(r) for c, r in records.items()}})

        for distribution, test_name, fn in TESTS:
            key = "means" if distribution == "mean" else "variances"
            a = distributions[grouping][Condition.INDV.value][key]
            b = distributions[grouping][Condition.SIMUL.value][key]
            name = f"{grouping}:{distribution}:{test_name.value}"
            try:
                result = _run_test(fn, a, b, logger, name)
            except CrowdAggError as e:
                logger.stage("analysis:test:error", {"name": name, "error": e.to_dict()})
                tests.append(TestOutcome(grouping=grouping, distribution=distribution, test=test_name, error=e.message))
                continue
            significant = result.p_value < alpha
            tests.append(TestOutcome(
                grouping=grouping,
                distribution=distribution,
                test=test_name,
                result=result,
                significant=significant,
            ))
            logger.stage("analysis:test", {"name": name, "statistic": result.statistic,
                                           "p_value": result.p_value, "significant": significant})

    logger.stage("analysis:done", {"tests": len(tests), "errors": sum(t.error is not None for t in tests)})
    return StatReport(
        alpha=alpha,
        grade_distribution=dist,
        moments=moments,
        tests=tests,
        distributions=distributions,
        metadata=ReportMetadata(started_at=started_at, finished_at=time.time(), version=__version__),
    )


def run_bias_analysis(
    indv_path: Union[str, Path],
    simul_path: Union[str, Path],
    out_path: Union[str, Path],
    alpha: float = 0.01,
    logger: Optional[StageLogger] = None,
) -> StatReport:
    """Load both files, run `bias_analysis` and write the StatReport JSON to out_path."""
    indv = load_csv(indv_path)
    simul = indv if Path(simul_path) == Path(indv_path) else load_csv(simul_path)
    report = bias_analysis(indv, simul, alpha=alpha, logger=logger)
    write_json(out_path, report)
    return report
