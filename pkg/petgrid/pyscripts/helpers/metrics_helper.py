"""Text-similarity metrics for generated findings and their rank agreement with human scores.

All metrics share one tokenizer: lowercase, split on anything that is not a letter or digit, with
decimal numbers such as "8.4" kept as a single token.

BLEU is corpus level with clipped n-gram precisions; a zero count for n >= 2 is smoothed to
1 / (candidate n-grams + 1) and a zero unigram count scores 0. ROUGE-L is the LCS F-measure with
beta = 1.2, averaged over pairs. meteor_simple aligns exact then Porter-stem matches, weights the
harmonic mean with alpha = 0.9 and applies 0.5 * frag^3 with frag = (chunks - 1) / (matches - 1).
CIDEr is the TF-IDF n-gram cosine (n = 1..4, IDF over the references) averaged over n and scaled
by 10, optionally with the sigma = 6 length Gaussian.
"""

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from nltk.stem import PorterStemmer
from nltk.translate.bleu_score import brevity_penalty, closest_ref_length
from nltk.util import ngrams
from scipy.stats import rankdata

from ..types.errors import DegenerateVariance, EmptyCorpus, LengthMismatch, PetGridError
from ..utils import common_utils as utils
from ..utils.common_utils import setup_logger

logger = setup_logger(__name__)

REPORT_SCHEMA_VERSION = 1
MAX_ORDER = 4
ROUGE_BETA = 1.2
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5
CIDER_SIGMA = 6.0
CIDER_SCALE = 10.0
METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "rouge_l", "meteor", "cider")

_TOKEN = re.compile(r"\d+(?:\.\d+)*|[^\W_]+")
_stemmer = PorterStemmer()


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class EvalPair:
    """Candidate / reference token lists for one lesion.

    Attributes:
        id: Pair identifier
        candidate: Generated finding tokens
        reference: Ground-truth finding tokens
        human_score: Optional expert score
        region: Optional region for the per-region breakdown
        extra_references: Further references (unused by the shipped data)
    """

    id: str
    candidate: tuple[str, ...]
    reference: tuple[str, ...]
    human_score: float | None = None
    region: str | None = None
    extra_references: tuple[tuple[str, ...], ...] = ()

    @classmethod
    def from_text(
        cls, pair_id: str, candidate: str, reference: str, human_score: float | None = None, region: str | None = None
    ) -> "EvalPair":
        return cls(
            id=str(pair_id),
            candidate=tuple(tokenize(candidate)),
            reference=tuple(tokenize(reference)),
            human_score=human_score,
            region=region,
        )

    @property
    def references(self) -> list[tuple[str, ...]]:
        return [self.reference, *self.extra_references]


def _require(pairs: list[EvalPair]) -> None:
    if not pairs:
        raise EmptyCorpus("Metric needs at least one pair")


def _ngram_counts(tokens, n: int) -> Counter:
    return Counter(ngrams(tokens, n))


def bleu_scores(pairs: list[EvalPair], max_order: int = MAX_ORDER) -> list[float]:
    """Corpus BLEU-1 .. BLEU-max_order."""
    _require(pairs)
    numerators = [0] * max_order
    denominators = [0] * max_order
    hyp_length = 0
    ref_length = 0
    for pair in pairs:
        hyp_length += len(pair.candidate)
        ref_length += closest_ref_length(pair.references, len(pair.candidate))
        for n in range(1, max_order + 1):
            counts = _ngram_counts(pair.candidate, n)
            max_ref = Counter()
            for reference in pair.references:
                max_ref |= _ngram_counts(reference, n)
            numerators[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            denominators[n - 1] += max(0, len(pair.candidate) - n + 1)

    if hyp_length == 0 or numerators[0] == 0:
        return [0.0] * max_order

    log_precisions = []
    for n, (num, den) in enumerate(zip(numerators, denominators), start=1):
        if n > 1 and num == 0:
            log_precisions.append(-math.log(den + 1))
        else:
            log_precisions.append(math.log(num / den))
    bp = brevity_penalty(ref_length, hyp_length)
    return [bp * math.exp(sum(log_precisions[:k]) / k) for k in range(1, max_order + 1)]


def bleu4(pairs: list[EvalPair]) -> float:
    """Corpus BLEU-4 with brevity penalty.

    Raises:
        EmptyCorpus: If pairs is empty
    """
    return bleu_scores(pairs)[MAX_ORDER - 1]


def _lcs_length(a, b) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if x == y else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l_pair(candidate, reference, beta: float = ROUGE_BETA) -> float:
    lcs = _lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return (1 + beta**2) * precision * recall / (recall + beta**2 * precision)


def rouge_l(pairs: list[EvalPair]) -> float:
    """Mean LCS F-measure over pairs (best reference per pair)."""
    _require(pairs)
    return float(np.mean([max(rouge_l_pair(p.candidate, r) for r in p.references) for p in pairs]))


def _align(candidate, reference) -> list[tuple[int, int]]:
    """Exact matches, then stem matches, each greedy left to right."""
    used_ref: set[int] = set()
    alignment: dict[int, int] = {}
    for key in (lambda t: t, _stemmer.stem):
        ref_keys = [key(t) for t in reference]
        for i, token in enumerate(candidate):
            if i in alignment:
                continue
            token_key = key(token)
            for j, ref_key in enumerate(ref_keys):
                if j not in used_ref and ref_key == token_key:
                    alignment[i] = j
                    used_ref.add(j)
                    break
    return sorted(alignment.items())


def meteor_pair(candidate, reference) -> float:
    alignment = _align(candidate, reference)
    matches = len(alignment)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    f_mean = precision * recall / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
    chunks = 1
    for (i0, j0), (i1, j1) in zip(alignment, alignment[1:]):
        if not (i1 == i0 + 1 and j1 == j0 + 1):
            chunks += 1
    fragmentation = (chunks - 1) / (matches - 1) if matches > 1 else 0.0
    penalty = METEOR_GAMMA * fragmentation**METEOR_BETA
    return f_mean * (1 - penalty)


def meteor_simple(pairs: list[EvalPair]) -> float:
    """Mean exact+stem METEOR over pairs (best reference per pair)."""
    _require(pairs)
    return float(np.mean([max(meteor_pair(p.candidate, r) for r in p.references) for p in pairs]))


def cider_scores(pairs: list[EvalPair], length_penalty: bool = False) -> list[float]:
    """Per-pair CIDEr with document frequencies taken over the pairs' references."""
    _require(pairs)
    n_docs = len(pairs)
    document_frequency: Counter = Counter()
    for pair in pairs:
        seen = set()
        for reference in pair.references:
            for n in range(1, MAX_ORDER + 1):
                seen.update(_ngram_counts(reference, n))
        document_frequency.update(seen)

    def vector(tokens, n: int) -> dict:
        return {
            g: c * (math.log(n_docs) - math.log(max(1.0, document_frequency[g])))
            for g, c in _ngram_counts(tokens, n).items()
        }

    def cosine(a: dict, b: dict) -> float:
        norm = math.sqrt(sum(v * v for v in a.values())) * math.sqrt(sum(v * v for v in b.values()))
        if norm == 0:
            return 0.0
        return sum(v * b.get(g, 0.0) for g, v in a.items()) / norm

    scores = []
    for pair in pairs:
        per_reference = []
        for reference in pair.references:
            similarity = float(np.mean([cosine(vector(pair.candidate, n), vector(reference, n)) for n in range(1, MAX_ORDER + 1)]))
            if length_penalty:
                delta = len(pair.candidate) - len(reference)
                similarity *= math.exp(-(delta**2) / (2 * CIDER_SIGMA**2))
            per_reference.append(similarity)
        scores.append(CIDER_SCALE * float(np.mean(per_reference)))
    return scores


def cider(pairs: list[EvalPair], length_penalty: bool = False) -> float:
    """Corpus CIDEr: mean of per-pair scores."""
    return float(np.mean(cider_scores(pairs, length_penalty)))


def spearman(x, y) -> float:
    """Pearson correlation of average ranks.

    Raises:
        LengthMismatch: If lengths differ or fewer than 3 samples
        DegenerateVariance: If either side is constant
    """
    if len(x) != len(y) or len(x) < 3:
        raise LengthMismatch(f"Spearman needs two equal-length samples of at least 3, got {len(x)} and {len(y)}")
    rx = rankdata(np.asarray(x, dtype=np.float64), method="average")
    ry = rankdata(np.asarray(y, dtype=np.float64), method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0 or syy == 0:
        raise DegenerateVariance("Spearman correlation is undefined for constant input")
    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


@dataclass
class EvalReport:
    """Per-pair and corpus scores, rank correlations and per-region breakdown."""

    per_pair: list[dict]
    corpus: dict[str, float]
    spearman: dict[str, float] = field(default_factory=dict)
    by_region: dict[str, dict[str, float]] = field(default_factory=dict)
    pair_count: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "pair_count": self.pair_count,
            "corpus": self.corpus,
            "per_pair": self.per_pair,
            "spearman": self.spearman,
            "by_region": self.by_region,
        }


def corpus_scores(pairs: list[EvalPair], cider_length_penalty: bool = False) -> dict[str, float]:
    """All corpus-level metrics keyed by METRIC_NAMES."""
    bleu = bleu_scores(pairs)
    return {
        "bleu1": bleu[0],
        "bleu2": bleu[1],
        "bleu3": bleu[2],
        "bleu4": bleu[3],
        "rouge_l": rouge_l(pairs),
        "meteor": meteor_simple(pairs),
        "cider": cider(pairs, cider_length_penalty),
    }


def evaluate(pairs: list[EvalPair], cider_length_penalty: bool = False) -> EvalReport:
    """Score a corpus.

    Per-pair BLEU treats the pair as a one-pair corpus; per-pair CIDEr uses the corpus IDF.
    Spearman is computed per metric over pairs that carry a human score; metrics whose correlation
    is undefined are left out with a warning.

    Raises:
        EmptyCorpus: If pairs is empty
    """
    _require(pairs)
    ciders = cider_scores(pairs, cider_length_penalty)
    per_pair = []
    for pair, pair_cider in zip(pairs, ciders):
        bleu = bleu_scores([pair])
        per_pair.append(
            {
                "id": pair.id,
                "bleu1": bleu[0],
                "bleu2": bleu[1],
                "bleu3": bleu[2],
                "bleu4": bleu[3],
                "rouge_l": rouge_l([pair]),
                "meteor": meteor_simple([pair]),
                "cider": pair_cider,
                "human_score": pair.human_score,
                "region": pair.region,
            }
        )

    correlations = {}
    scored = [row for row in per_pair if row["human_score"] is not None]
    if scored:
        human = [row["human_score"] for row in scored]
        for metric in METRIC_NAMES:
            try:
                correlations[metric] = spearman([row[metric] for row in scored], human)
            except (DegenerateVariance, LengthMismatch) as e:
                logger.warning(f"Spearman for {metric} omitted: {e}")

    by_region = {}
    regions = sorted({p.region for p in pairs if p.region})
    if regions:
        for region in regions:
            by_region[region] = corpus_scores([p for p in pairs if p.region == region], cider_length_penalty)

    report = EvalReport(
        per_pair=per_pair,
        corpus=corpus_scores(pairs, cider_length_penalty),
        spearman=correlations,
        by_region=by_region,
        pair_count=len(pairs),
    )
    logger.info(f"Evaluated {len(pairs)} pairs: " + ", ".join(f"{k}={v:.4f}" for k, v in report.corpus.items()))
    return report


def _eval_rows(path: str | Path) -> list[dict]:
    try:
        rows = utils.read_jsonl(path)
    except json.JSONDecodeError as e:
        raise PetGridError(f"{path}: not valid JSON lines ({e})") from e
    for n, row in enumerate(rows, start=1):
        if not isinstance(row, dict) or "id" not in row or not isinstance(row.get("text"), str):
            raise PetGridError(f"{path}: row {n} needs an id and a text string")
    return rows


def load_eval_pairs(pred_path: str | Path, ref_path: str | Path, human_path: str | Path | None = None) -> list[EvalPair]:
    """Join prediction and reference JSONL files on `id`.

    Rows are {"id", "text"}; reference rows may carry "region". The optional human score CSV has
    columns id,score. Pairs follow the reference file order.

    Raises:
        PetGridError: If a row lacks id or text, a human score is malformed, or a reference id has
            no prediction
    """
    predictions = {str(row["id"]): row["text"] for row in _eval_rows(pred_path)}
    human = {}
    if human_path:
        with open(human_path, "r", encoding="utf-8", newline="") as f:
            for n, row in enumerate(csv.DictReader(f), start=2):
                try:
                    human[str(row["id"]).strip()] = float(row["score"])
                except (KeyError, TypeError, ValueError) as e:
                    raise PetGridError(f"{human_path}: line {n} needs id and a numeric score") from e

    pairs = []
    for row in _eval_rows(ref_path):
        pair_id = str(row["id"])
        if pair_id not in predictions:
            raise PetGridError(f"No prediction for reference id {pair_id}")
        pairs.append(
            EvalPair.from_text(pair_id, predictions[pair_id], row["text"], human.get(pair_id), row.get("region"))
        )
    return pairs
