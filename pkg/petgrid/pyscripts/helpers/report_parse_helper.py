"""Rule-based extraction of lesion-level records from PET report sentences.

A sentence becomes a candidate when it mentions both an SUV value and a slice number. Each SUV
mention is paired with the nearest following slice mention (else the nearest preceding one)
between its neighbouring SUV mentions. Anatomy comes from a longest-match lexicon lookup.
Patterns are loaded once from a versioned YAML inventory and shared read-only.
"""

import csv
import logging
import re
from dataclasses import asdict, dataclass, fields
from datetime import date
from functools import lru_cache
from pathlib import Path

import yaml

from ..types.builtin_resource import BuiltinResource
from ..types.errors import ConfigInvalid, NoPairFound, PetGridError
from ..types.report_format import ReportFormat
from ..types.tracer import Tracer
from ..utils import common_utils as utils
from ..utils.common_utils import setup_logger

UNKNOWN = "unknown"
REPORT_SUFFIXES = (".txt",)
_SENTENCE_BOUNDARY = re.compile(r'(?<=[.!?])\s+(?=[A-Z])')


@dataclass(frozen=True)
class Sentence:
    """One report sentence.

    Attributes:
        text: Whitespace-normalized sentence text
        exam_id: Identifier of the report it came from
        index: Position within the report (0-based)
    """

    text: str
    exam_id: str
    index: int

    def __post_init__(self):
        normalized = " ".join(self.text.split())
        if not normalized:
            raise ValueError(f"Sentence {self.index} of exam {self.exam_id} is empty")
        object.__setattr__(self, "text", normalized)


@dataclass(frozen=True)
class Measurement:
    """A paired (SUVmax, slice) mention and the character span covering both."""

    suv_max: float
    slice_number: int
    span: tuple[int, int]


@dataclass
class LesionRecord:  # pylint: disable=too-many-instance-attributes
    """Structured finding {region, organ, anatomic subsite, report} with its measurements.

    slice_number is 1-based as written in the report; `slice_index` is the only place it is
    converted to the 0-based depth index used on volumes.
    """

    region: str
    organ: str
    anatomic_subsite: str
    report: str
    suv_max: float
    slice_number: int
    exam_id: str
    is_prior_reference: bool
    sentence_index: int

    def __post_init__(self):
        if not self.suv_max > 0:
            raise PetGridError(f"suv_max must be positive, got {self.suv_max}")
        if self.slice_number < 1:
            raise PetGridError(f"slice_number must be >= 1, got {self.slice_number}")

    @property
    def slice_index(self) -> int:
        return self.slice_number - 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LesionRecord":
        """Create a LesionRecord from a JSONL row; missing or unknown keys are errors."""
        expected = {f.name for f in fields(cls)}
        missing = expected - set(data)
        unknown = set(data) - expected
        if missing or unknown:
            raise PetGridError(f"Invalid lesion record keys: missing={sorted(missing)} unknown={sorted(unknown)}")
        return cls(
            region=str(data["region"]),
            organ=str(data["organ"]),
            anatomic_subsite=str(data["anatomic_subsite"]),
            report=str(data["report"]),
            suv_max=float(data["suv_max"]),
            slice_number=int(data["slice_number"]),
            exam_id=str(data["exam_id"]),
            is_prior_reference=bool(data["is_prior_reference"]),
            sentence_index=int(data["sentence_index"]),
        )


@dataclass(frozen=True)
class LexiconEntry:
    term: str
    region: str
    organ: str
    anatomic_subsite: str


class AnatomyLexicon:
    """Term -> (region, organ, anatomic subsite) lookup with longest-match semantics."""

    def __init__(self, entries: list[LexiconEntry]):
        ordered = sorted(entries, key=lambda e: (-len(e.term), e.term.lower()))
        self._patterns = [
            (entry, re.compile(r'\b' + re.escape(entry.term) + r's?\b', re.IGNORECASE)) for entry in ordered
        ]

    def __len__(self) -> int:
        return len(self._patterns)

    @classmethod
    def from_tsv(cls, path: str | Path) -> "AnatomyLexicon":
        """Load a TSV with header `term, region, organ, anatomic_subsite`."""
        entries = []
        with open(path, "r", encoding="utf-8", newline="") as f:
            for row in csv.DictReader(f, delimiter="\t"):
                term = (row.get("term") or "").strip()
                if not term or term.startswith("#"):
                    continue
                entries.append(
                    LexiconEntry(
                        term=term,
                        region=row["region"].strip(),
                        organ=row["organ"].strip(),
                        anatomic_subsite=row["anatomic_subsite"].strip(),
                    )
                )
        return cls(entries)

    def lookup(self, text: str) -> LexiconEntry | None:
        """Longest matching term; equal lengths resolve to the earliest position."""
        best: tuple[int, LexiconEntry] | None = None
        best_length = 0
        for entry, pattern in self._patterns:
            if len(entry.term) < best_length:
                break
            match = pattern.search(text)
            if match and (best is None or match.start() < best[0]):
                best = (match.start(), entry)
                best_length = len(entry.term)
        return best[1] if best else None


@dataclass(frozen=True)
class MeasurementPatterns:
    """Compiled pattern inventory from measurement_patterns.yml."""

    version: int
    suv_patterns: tuple[re.Pattern, ...]
    slice_patterns: tuple[re.Pattern, ...]
    prior_cue_patterns: tuple[re.Pattern, ...]
    date_patterns: tuple[re.Pattern, ...]
    tracer_patterns: tuple[tuple[Tracer, tuple[re.Pattern, ...]], ...]

    @classmethod
    def from_yaml(cls, path: str | Path) -> "MeasurementPatterns":
        """Load and compile the inventory.

        Raises:
            ValueError: If an SUV or slice pattern lacks a `value` group
        """
        with open(path, "r", encoding="utf-8") as f:
            config = yaml.safe_load(f) or {}

        def compile_all(key: str, needs_value: bool = False) -> tuple[re.Pattern, ...]:
            compiled = tuple(re.compile(p, re.IGNORECASE) for p in config.get(key) or [])
            if needs_value:
                for pattern in compiled:
                    if "value" not in pattern.groupindex:
                        raise ConfigInvalid(f"{key} pattern has no 'value' group: {pattern.pattern}")
            return compiled

        tracers = tuple(
            (Tracer(Tracer.normalize(name)), tuple(re.compile(p, re.IGNORECASE) for p in patterns))
            for name, patterns in (config.get("tracers") or {}).items()
        )
        return cls(
            version=int(config.get("version", 0)),
            suv_patterns=compile_all("suv", needs_value=True),
            slice_patterns=compile_all("slice", needs_value=True),
            prior_cue_patterns=compile_all("prior_cues"),
            date_patterns=compile_all("dates"),
            tracer_patterns=tracers,
        )


@lru_cache(maxsize=None)
def default_patterns() -> MeasurementPatterns:
    return MeasurementPatterns.from_yaml(BuiltinResource.MEASUREMENT_PATTERNS.path)


@lru_cache(maxsize=None)
def default_lexicon() -> AnatomyLexicon:
    return AnatomyLexicon.from_tsv(BuiltinResource.ANATOMY_LEXICON.path)


@dataclass(frozen=True)
class _Mention:
    start: int
    end: int
    value: str


def _find_mentions(patterns: tuple[re.Pattern, ...], text: str) -> list[_Mention]:
    """All matches of a pattern family, leftmost-longest, non-overlapping, in text order."""
    matches = sorted(
        ((m.start(), m.end(), m.group("value")) for pattern in patterns for m in pattern.finditer(text)),
        key=lambda t: (t[0], -t[1]),
    )
    mentions: list[_Mention] = []
    for start, end, value in matches:
        if mentions and start < mentions[-1].end:
            continue
        mentions.append(_Mention(start, end, value))
    return mentions


def _suv_mentions(text: str, patterns: MeasurementPatterns) -> list[_Mention]:
    return [m for m in _find_mentions(patterns.suv_patterns, text) if float(m.value) > 0]


def _slice_mentions(text: str, patterns: MeasurementPatterns) -> list[_Mention]:
    return [m for m in _find_mentions(patterns.slice_patterns, text) if int(m.value) >= 1]


def filter_candidate(s: Sentence, patterns: MeasurementPatterns | None = None) -> bool:
    """True iff the sentence has at least one SUV mention and at least one slice mention."""
    patterns = patterns or default_patterns()
    return bool(_suv_mentions(s.text, patterns)) and bool(_slice_mentions(s.text, patterns))


def extract_measurements(s: Sentence, patterns: MeasurementPatterns | None = None) -> list[Measurement]:
    """Pair every SUV mention with a slice mention.

    Each SUV mention takes the first unclaimed slice mention between it and the next SUV mention;
    failing that, the last unclaimed one between the previous SUV mention and itself. SUV mentions
    left without a slice are dropped.

    Returns:
        Measurements in sentence order with non-overlapping spans

    Raises:
        NoPairFound: If no SUV mention can be paired
    """
    patterns = patterns or default_patterns()
    suvs = _suv_mentions(s.text, patterns)
    slices = _slice_mentions(s.text, patterns)

    claimed: set[int] = set()
    pairs: list[Measurement] = []
    for i, suv in enumerate(suvs):
        previous_end = suvs[i - 1].end if i > 0 else 0
        next_start = suvs[i + 1].start if i + 1 < len(suvs) else len(s.text) + 1
        following = [k for k, sl in enumerate(slices) if k not in claimed and suv.end <= sl.start < next_start]
        preceding = [k for k, sl in enumerate(slices) if k not in claimed and previous_end <= sl.start and sl.end <= suv.start]
        if following:
            k = following[0]
        elif preceding:
            k = preceding[-1]
        else:
            continue
        claimed.add(k)
        slice_mention = slices[k]
        pairs.append(
            Measurement(
                suv_max=float(suv.value),
                slice_number=int(slice_mention.value),
                span=(min(suv.start, slice_mention.start), max(suv.end, slice_mention.end)),
            )
        )

    if not pairs:
        raise NoPairFound(
            f"No (SUV, slice) pair in sentence {s.index} of exam {s.exam_id}: "
            f"{len(suvs)} SUV and {len(slices)} slice mentions"
        )
    return pairs


def _parse_date(match: re.Match) -> date | None:
    try:
        return date(int(match.group("year")), int(match.group("month")), int(match.group("day")))
    except ValueError:
        return None


def flag_prior_reference(
    s: Sentence, patterns: MeasurementPatterns | None = None, exam_date: date | None = None
) -> bool:
    """True iff the sentence carries a prior-study cue or a date older than exam_date."""
    patterns = patterns or default_patterns()
    if any(cue.search(s.text) for cue in patterns.prior_cue_patterns):
        return True
    if exam_date is not None:
        for pattern in patterns.date_patterns:
            for match in pattern.finditer(s.text):
                mentioned = _parse_date(match)
                if mentioned is not None and mentioned < exam_date:
                    return True
    return False


def to_record(
    s: Sentence, pair: Measurement, vocab: AnatomyLexicon | None = None, is_prior_reference: bool = False
) -> LesionRecord:
    """Build a LesionRecord; anatomy degrades to "unknown" when no lexicon term matches."""
    vocab = vocab or default_lexicon()
    entry = vocab.lookup(s.text)
    return LesionRecord(
        region=entry.region if entry else UNKNOWN,
        organ=entry.organ if entry else UNKNOWN,
        anatomic_subsite=entry.anatomic_subsite if entry else UNKNOWN,
        report=s.text,
        suv_max=pair.suv_max,
        slice_number=pair.slice_number,
        exam_id=s.exam_id,
        is_prior_reference=is_prior_reference,
        sentence_index=s.index,
    )


def split_sentences(text: str, report_format: ReportFormat = ReportFormat.LINES) -> list[str]:
    """Split report text into sentences.

    LINES keeps every non-empty line; RAW splits whitespace-normalized text after . ! or ?
    when the next word starts with a capital letter.
    """
    if ReportFormat(report_format) == ReportFormat.LINES:
        return [line.strip() for line in text.splitlines() if line.strip()]
    normalized = " ".join(text.split())
    if not normalized:
        return []
    return [part for part in _SENTENCE_BOUNDARY.split(normalized) if part.strip()]


def detect_tracer(text: str, patterns: MeasurementPatterns | None = None) -> Tracer:
    """First tracer whose pattern occurs in the text, else Tracer.UNKNOWN."""
    patterns = patterns or default_patterns()
    for tracer, tracer_patterns in patterns.tracer_patterns:
        if any(p.search(text) for p in tracer_patterns):
            return tracer
    return Tracer.UNKNOWN


def write_records(path: str | Path, records: list[LesionRecord]) -> int:
    """Write records as JSONL."""
    return utils.write_jsonl(path, (record.to_dict() for record in records))


def read_records(path: str | Path) -> list[LesionRecord]:
    """Read records written by write_records."""
    return [LesionRecord.from_dict(row) for row in utils.read_jsonl(path)]


@dataclass
class ParsedReport:
    """Parse outcome for one report file.

    Attributes:
        exam_id: File stem of the report
        sentences: All sentences in report order
        candidate_indices: Sentences passing filter_candidate
        unpaired_indices: Candidates for which no pair could be formed
        records: Extracted records, prior references included (flagged)
        tracer: Radiotracer named in the report, if any
    """

    exam_id: str
    sentences: list[Sentence]
    candidate_indices: list[int]
    unpaired_indices: list[int]
    records: list[LesionRecord]
    tracer: Tracer = Tracer.UNKNOWN


class ReportParseHelper:
    """Parses report files into LesionRecords with one shared pattern set and lexicon."""

    def __init__(
        self,
        lexicon: AnatomyLexicon | None = None,
        patterns: MeasurementPatterns | None = None,
        report_format: ReportFormat | str = ReportFormat.LINES,
        log_level: int | str = logging.INFO,
    ):
        """
        Args:
            lexicon: Anatomy lexicon; the shipped TSV when omitted
            patterns: Pattern inventory; the shipped YAML when omitted
            report_format: Sentence layout of report files
            log_level: The logging level for the helper
        """
        self.lexicon = lexicon or default_lexicon()
        self.patterns = patterns or default_patterns()
        self.report_format = ReportFormat(ReportFormat.normalize(str(getattr(report_format, "value", report_format))))
        self.logger = setup_logger('ReportParseHelper', level=log_level)

    @classmethod
    def from_paths(
        cls,
        lexicon_path: str | None = None,
        patterns_path: str | None = None,
        report_format: ReportFormat | str = ReportFormat.LINES,
        log_level: int | str = logging.INFO,
    ) -> "ReportParseHelper":
        """Build a helper from optional lexicon / pattern file paths."""
        lexicon = AnatomyLexicon.from_tsv(lexicon_path) if lexicon_path else None
        patterns = MeasurementPatterns.from_yaml(patterns_path) if patterns_path else None
        return cls(lexicon=lexicon, patterns=patterns, report_format=report_format, log_level=log_level)

    def parse_text(self, exam_id: str, text: str, exam_date: date | None = None) -> ParsedReport:
        """Parse one report's text.

        Args:
            exam_id: Identifier stamped on every record
            text: Report text
            exam_date: Exam date for dated prior references, if known

        Returns:
            ParsedReport with records in sentence order
        """
        sentences = [Sentence(text=t, exam_id=exam_id, index=i) for i, t in enumerate(split_sentences(text, self.report_format))]
        candidates = []
        unpaired = []
        records = []
        for sentence in sentences:
            if not filter_candidate(sentence, self.patterns):
                continue
            candidates.append(sentence.index)
            try:
                pairs = extract_measurements(sentence, self.patterns)
            except NoPairFound as e:
                self.logger.debug(str(e))
                unpaired.append(sentence.index)
                continue
            is_prior = flag_prior_reference(sentence, self.patterns, exam_date)
            records.extend(to_record(sentence, pair, self.lexicon, is_prior) for pair in pairs)

        tracer = detect_tracer(text, self.patterns)
        self.logger.info(
            f"Parsed exam {exam_id}: {len(sentences)} sentences, {len(candidates)} candidates, "
            f"{len(records)} records ({sum(r.is_prior_reference for r in records)} prior), tracer {tracer.value}"
        )
        return ParsedReport(
            exam_id=exam_id,
            sentences=sentences,
            candidate_indices=candidates,
            unpaired_indices=unpaired,
            records=records,
            tracer=tracer,
        )

    def process_file(self, input_file_path: str, file_encoding: str | None = None, exam_date: date | None = None) -> ParsedReport:
        """Parse a report file; the exam id is the file stem and the encoding is detected with chardet."""
        content, encoding = utils.get_file_content(input_file_path, encoding=file_encoding)
        self.logger.debug(f"Read {input_file_path} ({encoding})")
        return self.parse_text(utils.file_stem(input_file_path), content, exam_date)

    def process_directory(
        self, input_dir: str, file_encoding: str | None = None, exam_dates: dict[str, date] | None = None
    ) -> list[ParsedReport]:
        """
        Parse every .txt report under a directory, comma list or glob, ordered by exam id.

        Args:
            input_dir (str): The directory/pattern containing the reports.
            file_encoding (str | None): Encoding override; detected with chardet when omitted.
            exam_dates (dict[str, date] | None): Optional exam dates keyed by exam id.

        Returns:
            list[ParsedReport]: One entry per report file.
        """
        exam_dates = exam_dates or {}
        paths = [p for p in utils.expand_input_paths(input_dir) if p.lower().endswith(REPORT_SUFFIXES)]
        reports = [
            self.process_file(path, file_encoding=file_encoding, exam_date=exam_dates.get(utils.file_stem(path)))
            for path in paths
        ]
        return sorted(reports, key=lambda r: r.exam_id)
