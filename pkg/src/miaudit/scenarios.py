"""The two audit scenarios and their repetition harness.

Single membership inference labels the M highest-scoring of 2M records as
training members; set membership inference decides which of two disjoint
M-record sets was the training subset (majority vote over the top-M records,
with a median-score cross-check rule). `run_trials` repeats either decision
over seeded trials and aggregates accuracies.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import stats as _sstats

from .core_data import RecordSet, ScoreVector, TrialReport
from .errors import DataError, EmptyInputError, ImbalanceError, InsufficientDataError


@dataclass(frozen=True)
class ScenarioConfig:
    M: int = 100
    trials: int = 10
    seed: int = 0
    tie_policy: str = "seeded-random"

    def __post_init__(self):
        if self.M < 1:
            raise DataError("M must be at least 1")
        if self.trials < 1:
            raise DataError("trials must be at least 1")
        if self.tie_policy != "seeded-random":
            raise DataError(f"unknown tie policy {self.tie_policy!r}")


@dataclass(frozen=True)
class AggregateReport:
    single_mean: float
    single_std: float
    set_mean: float
    set_std: float
    per_trial: tuple[TrialReport, ...]
    config_digest: str = ""

    def __post_init__(self):
        if not (0.0 <= self.single_mean <= 1.0 and 0.0 <= self.set_mean <= 1.0):
            raise DataError("mean accuracies must lie in [0, 1]")
        if self.single_std < 0 or self.set_std < 0:
            raise DataError("standard deviations must be non-negative")
        object.__setattr__(self, "per_trial", tuple(self.per_trial))

    def to_dict(self) -> dict:
        n = len(self.per_trial)
        return {
            "single_mean": self.single_mean,
            "single_std": self.single_std,
            "single_stderr": self.single_std / math.sqrt(n) if n else 0.0,
            "set_mean": self.set_mean,
            "set_std": self.set_std,
            "set_stderr": self.set_std / math.sqrt(n) if n else 0.0,
            "trials": n,
            "config_digest": self.config_digest,
            "per_trial": [
                {
                    "trial_seed": t.trial_seed,
                    "single_accuracy": t.single_accuracy,
                    "set_correct": t.set_correct,
                    "chosen_ids": list(t.chosen_ids),
                }
                for t in self.per_trial
            ],
        }


def _top_m_ids(scores: ScoreVector, m: int, seed: int) -> list[str]:
    """Top-m record ids by score; ties broken by a seeded shuffle before a
    stable descending sort."""
    ids = np.array(scores.ids)
    vals = np.array([s for _, s in scores.entries])
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ids.size)
    order = np.argsort(-vals[perm], kind="stable")
    return [str(i) for i in ids[perm][order][:m]]


def single_mi(
    scores: ScoreVector,
    true_train_ids: Iterable[str],
    M: int,
    seed: int = 0,
) -> TrialReport:
    """Label the M highest-scoring records as training members."""
    true_train = set(true_train_ids)
    if len(scores) != 2 * M:
        raise ImbalanceError(f"expected 2M={2 * M} scored records, got {len(scores)}")
    members_present = sum(1 for i in scores.ids if i in true_train)
    if members_present != M:
        raise ImbalanceError(
            f"expected exactly M={M} true members among the scores, found {members_present}"
        )
    chosen = _top_m_ids(scores, M, seed)
    accuracy = sum(1 for i in chosen if i in true_train) / M
    return TrialReport(
        trial_seed=seed,
        single_accuracy=accuracy,
        set_correct=None,
        chosen_ids=tuple(chosen),
    )


def _check_sets(
    scores: ScoreVector, set_a: set[str], set_b: set[str]
) -> int:
    if set_a & set_b:
        raise ImbalanceError("the two record sets overlap")
    if len(set_a) != len(set_b):
        raise ImbalanceError(
            f"sets must have equal size, got {len(set_a)} and {len(set_b)}"
        )
    covered = set(scores.ids)
    if covered != set_a | set_b:
        raise ImbalanceError("scores do not cover exactly the two sets")
    return len(set_a)


def set_mi(
    scores: ScoreVector,
    set_a_ids: Iterable[str],
    set_b_ids: Iterable[str],
    true_train_set: str,
    seed: int = 0,
) -> TrialReport:
    """Pick the set contributing the majority of the top-M records.

    An exact split is resolved by a seeded coin flip.
    """
    set_a, set_b = set(set_a_ids), set(set_b_ids)
    if true_train_set not in ("a", "b"):
        raise DataError("true_train_set must be 'a' or 'b'")
    m = _check_sets(scores, set_a, set_b)
    chosen = _top_m_ids(scores, m, seed)
    from_a = sum(1 for i in chosen if i in set_a)
    if from_a * 2 > m:
        label = "a"
    elif from_a * 2 < m:
        label = "b"
    else:
        label = "a" if np.random.default_rng([seed, 1]).random() < 0.5 else "b"
    true_ids = set_a if true_train_set == "a" else set_b
    accuracy = sum(1 for i in chosen if i in true_ids) / m
    return TrialReport(
        trial_seed=seed,
        single_accuracy=accuracy,
        set_correct=label == true_train_set,
        chosen_ids=tuple(chosen),
    )


def set_mi_median_rule(
    scores: ScoreVector,
    set_a_ids: Iterable[str],
    set_b_ids: Iterable[str],
    seed: int = 0,
) -> str:
    """Pick the set with the larger median score (cross-check for set_mi)."""
    set_a, set_b = set(set_a_ids), set(set_b_ids)
    _check_sets(scores, set_a, set_b)
    by_id = scores.as_dict()
    med_a = float(np.median([by_id[i] for i in set_a]))
    med_b = float(np.median([by_id[i] for i in set_b]))
    if med_a > med_b:
        return "a"
    if med_b > med_a:
        return "b"
    return "a" if np.random.default_rng([seed, 1]).random() < 0.5 else "b"


@dataclass(frozen=True)
class TrialData:
    """One trial's draw: equal-size train/test record sets plus attack inputs."""

    train: RecordSet
    test: RecordSet
    payload: object = None


TrialProvider = Callable[[int, np.random.Generator], TrialData]
AttackRunner = Callable[[TrialData], ScoreVector]


def subsample_to_balance(
    pool: RecordSet, size: int, rng: np.random.Generator
) -> RecordSet:
    """Draw `size` records without replacement so both audit sets match."""
    if len(pool) < size:
        raise InsufficientDataError(
            f"pool has {len(pool)} records, need {size}"
        )
    idx = rng.choice(len(pool), size=size, replace=False)
    return RecordSet(
        ids=tuple(pool.ids[i] for i in idx),
        data=pool.data[idx],
        origin_tag=pool.origin_tag,
    )


def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def run_trials(
    attack_runner: AttackRunner,
    data_provider: TrialProvider,
    config: ScenarioConfig,
) -> AggregateReport:
    """Repeat single and set membership inference over seeded trials.

    Each trial draws fresh data from the provider with an independent RNG
    stream derived from (seed, trial index); the whole report is reproducible
    from (seed, config).
    """
    reports: list[TrialReport] = []
    for t in range(config.trials):
        tseed = _trial_seed(config.seed, t)
        rng = np.random.default_rng([config.seed, t])
        trial = data_provider(t, rng)
        if len(trial.train) != config.M or len(trial.test) != config.M:
            raise ImbalanceError(
                f"trial {t}: provider returned {len(trial.train)} train / "
                f"{len(trial.test)} test records, expected M={config.M}"
            )
        scores = attack_runner(trial)
        single = single_mi(scores, trial.train.ids, config.M, seed=tseed)
        decision = set_mi(scores, trial.train.ids, trial.test.ids, "a", seed=tseed)
        reports.append(
            TrialReport(
                trial_seed=tseed,
                single_accuracy=single.single_accuracy,
                set_correct=decision.set_correct,
                chosen_ids=single.chosen_ids,
            )
        )
    singles = np.array([r.single_accuracy for r in reports])
    sets = np.array([1.0 if r.set_correct else 0.0 for r in reports])
    ddof = 1 if len(reports) > 1 else 0
    digest_payload = {
        "M": config.M,
        "trials": config.trials,
        "seed": config.seed,
        "tie_policy": config.tie_policy,
    }
    blob = json.dumps(digest_payload, sort_keys=True)
    digest = json.dumps(
        {**digest_payload, "sha256": hashlib.sha256(blob.encode()).hexdigest()[:16]},
        sort_keys=True,
    )
    return AggregateReport(
        single_mean=float(singles.mean()),
        single_std=float(singles.std(ddof=ddof)),
        set_mean=float(sets.mean()),
        set_std=float(sets.std(ddof=ddof)),
        per_trial=tuple(reports),
        config_digest=digest,
    )


def anova_f(groups: list[np.ndarray]) -> tuple[float, int, int]:
    """One-way ANOVA F statistic with (between, within) degrees of freedom.

    Zero within-group variance with unequal group means yields F = +inf
    (reported, not raised).
    """
    if len(groups) < 2:
        raise EmptyInputError("need at least two groups")
    arrays = [np.asarray(g, dtype=np.float64).ravel() for g in groups]
    if any(a.size < 2 for a in arrays):
        raise EmptyInputError("each group needs at least two values")
    k = len(arrays)
    n_total = sum(a.size for a in arrays)
    grand = sum(float(a.sum()) for a in arrays) / n_total
    ss_between = sum(a.size * (float(a.mean()) - grand) ** 2 for a in arrays)
    ss_within = sum(float(((a - a.mean()) ** 2).sum()) for a in arrays)
    df_between = k - 1
    df_within = n_total - k
    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ms_within == 0.0:
        f = 0.0 if ms_between == 0.0 else float("inf")
    else:
        f = ms_between / ms_within
    return f, df_between, df_within


def anova_p(f: float, df_between: int, df_within: int) -> float:
    """Right-tail p-value of the F statistic."""
    if math.isinf(f):
        return 0.0
    return float(_sstats.f.sf(f, df_between, df_within))
