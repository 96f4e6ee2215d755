"""Constraint micro-grammar: constraint text -> native checker parameters.

The parser is deliberately narrow. Any phrase it cannot read with
confidence yields None, and the caller marks the checker unavailable.

Numeric phrases:
    at least / no fewer than / no less than / a minimum of N    -> >= N
    more than / over N                                          -> >= N+1
    at most / no more than / a maximum of / up to / not exceed N -> <= N
    fewer than / less than / under N                            -> <= N-1
    exactly N, or a bare "N <unit>"                             -> == N
    between N and M, N to M                                     -> [N, M]
    approximately / about / around / roughly N                  -> [floor(N*(1-band)), ceil(N*(1+band))]
Numbers are digits or the English words one..twenty.
"""

from __future__ import annotations

import math
from fractions import Fraction
import re

from .model import ConstraintType, HardConstraint, NativeBody
from .textstats import LANGUAGE_NAMES

NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6, "seven": 7,
    "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12, "thirteen": 13,
    "fourteen": 14, "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18,
    "nineteen": 19, "twenty": 20,
}
_NUM = r"(\d[\d,]*|" + "|".join(sorted(NUMBER_WORDS, key=len, reverse=True)) + r")"

_GE = r"at\s+least|no\s+fewer\s+than|no\s+less\s+than|a\s+minimum\s+of|minimum\s+of"
_GT = r"more\s+than|over|greater\s+than"
_LE = r"at\s+most|no\s+more\s+than|a\s+maximum\s+of|maximum\s+of|up\s+to|not\s+exceed(?:ing)?|not\s+to\s+exceed"
_LT = r"fewer\s+than|less\s+than|under"
_APPROX = r"approximately|about|around|roughly|approx\.?"

UNITS = {
    ConstraintType.WORD_COUNT: r"words?",
    ConstraintType.PARAGRAPH_COUNT: r"paragraphs?",
    ConstraintType.SENTENCE_COUNT: r"sentences?",
}

DEFAULT_APPROX_BAND = 0.10


def parse_number(token: str) -> int:
    token = token.lower().replace(",", "")
    return NUMBER_WORDS[token] if token in NUMBER_WORDS else int(token)


def parse_quantity(text: str, unit: str | None = None, approx_band: float = DEFAULT_APPROX_BAND) -> dict | None:
    """Parse the first numeric phrase in `text` into comparison params.

    With `unit`, the number must be followed (within two words) by the unit;
    a bare "N" without a qualifier then means exactly N.
    """
    t = text.lower()
    tail = rf"(?:\s+[\w-]+){{0,2}}?(?:\s+|-)(?:{unit})\b" if unit else ""
    tried = [
        (rf"\bbetween\s+{_NUM}\s+and\s+{_NUM}{tail}", "between"),
        (rf"\b{_NUM}\s*(?:to|-|–)\s*{_NUM}{tail}", "between"),
        (rf"\b(?:{_APPROX})\s+{_NUM}{tail}", "approx"),
        (rf"\b(?:{_LE})\s+{_NUM}{tail}", "<="),
        (rf"\b(?:{_GE})\s+{_NUM}{tail}", ">="),
        (rf"\b(?:{_LT})\s+{_NUM}{tail}", "<"),
        (rf"\b(?:{_GT})\s+{_NUM}{tail}", ">"),
        (rf"\bexactly\s+{_NUM}{tail}", "=="),
    ]
    if unit:
        tried.append((rf"\b{_NUM}{tail}", "=="))
    for pattern, op in tried:
        m = re.search(pattern, t)
        if not m:
            continue
        # "no more than" must not be read as "more than"
        if op == ">" and re.search(r"\bno\s+$", t[: m.start()]):
            continue
        if op == "<" and re.search(r"\bno\s+$", t[: m.start()]):
            continue
        n = parse_number(m.group(1))
        if op == "between":
            lo, hi = sorted((n, parse_number(m.group(2))))
            return {"op": "between", "lo": lo, "hi": hi}
        if op == "approx":
            band = Fraction(str(approx_band))  # exact, so 200 * 1.1 is 220 and not 221
            return {"op": "between", "lo": math.floor(n * (1 - band)), "hi": math.ceil(n * (1 + band))}
        if op == ">":
            return {"op": ">=", "n": n + 1}
        if op == "<":
            return {"op": "<=", "n": n - 1} if n > 0 else None
        return {"op": op, "n": n}
    return None


_QUOTED = re.compile(r'"([^"\n]+)"|“([^”\n]+)”|‘([^’\n]+)’|(?<![\w])\'([^\'\n]+)\'(?![\w])')


def quoted_spans(text: str) -> list[str]:
    return [next(g for g in m.groups() if g is not None) for m in _QUOTED.finditer(text)]


def longest_quoted(text: str) -> str | None:
    spans = [s for s in quoted_spans(text) if s.strip()]
    return max(spans, key=len) if spans else None


# Capitalized instruction words that are never the keyword itself.
_CUE_WORDS = {
    "include", "includes", "including", "mention", "use", "using", "do", "don't", "must", "avoid",
    "never", "the", "please", "contain", "keyword", "keywords", "word", "words", "phrase", "make",
    "ensure", "exclude", "without", "not", "no", "should", "response", "answer", "your", "a", "an",
    "it", "in", "at", "least", "times", "once", "twice", "thrice", "exactly",
}


def trailing_capitalized(text: str) -> str | None:
    tokens = re.findall(r"\b[A-Z][\w-]*", text)
    tokens = [t for t in tokens if t.lower() not in _CUE_WORDS]
    return tokens[-1] if tokens else None


def parse_frequency(text: str) -> dict:
    t = text.lower()
    if re.search(r"\btwice\b", t):
        if re.search(r"\bexactly\s+twice\b", t):
            return {"op": "==", "n": 2}
        if re.search(r"\b(?:at\s+most|no\s+more\s+than)\s+twice\b", t):
            return {"op": "<=", "n": 2}
        return {"op": ">=", "n": 2}
    if re.search(r"\bthrice\b", t):
        return {"op": ">=", "n": 3}
    q = parse_quantity(t, unit=r"times?")
    if q is not None:
        return q
    if re.search(r"\bonce\b", t):
        return {"op": "==", "n": 1} if re.search(r"\bexactly\s+once\b|\bonly\s+once\b", t) else {"op": ">=", "n": 1}
    return {"op": ">=", "n": 1}


def _keyword(text: str) -> str | None:
    return longest_quoted(text) or trailing_capitalized(text)


_NEGATION = re.compile(r"\b(?:avoid|avoiding|do\s+not|don't|never|no|not|without|must\s+not|refrain)\b", re.I)

PUNCTUATION_NAMES = [
    (r"semicolons?", ";"),
    (r"colons?", ":"),
    (r"commas?", ","),
    (r"exclamation\s+(?:marks?|points?)", "!"),
    (r"question\s+marks?", "?"),
    (r"(?:periods?|full\s+stops?)", "."),
    (r"em[\s-]?dash(?:es)?", "—"),
    (r"ellips[ie]s", "…"),
    (r"hyphens?", "-"),
    (r"parenthes[ie]s|brackets", "()"),
    (r"(?:quotation|quote)\s+marks?", '"'),
    (r"apostrophes?", "'"),
]

CODE_LANGUAGES = (
    "python", "javascript", "typescript", "java", "json", "yaml", "html", "css", "sql",
    "bash", "shell", "cpp", "go", "rust", "ruby", "markdown", "xml",
)


def _punctuation(text: str) -> NativeBody | None:
    t = text.lower()
    chars = []
    for pattern, ch in PUNCTUATION_NAMES:
        if re.search(rf"\b(?:{pattern})\b", t):
            chars.append(ch)
    for span in quoted_spans(text):
        if span.strip() and all(not c.isalnum() and not c.isspace() for c in span):
            chars.extend(c for c in span if c not in chars)
    if not chars:
        return None
    ordered = "".join(dict.fromkeys("".join(chars)))
    kind = "punct_exclude" if _NEGATION.search(t) else "punct_include"
    return NativeBody(kind, {"chars": ordered})


def _list_format(text: str) -> NativeBody | None:
    t = text.lower()
    quoted = quoted_spans(text)
    if re.search(r"\bnumbered\b|\d\.\s*,", t) or any(re.fullmatch(r"\d+\.\s*", q) for q in quoted):
        return NativeBody("list_format", {"marker": "numbered"})
    if any(q.strip() == "-" for q in quoted) or re.search(r"\bdash(?:es)?\b|\bhyphens?\b", t):
        return NativeBody("list_format", {"marker": "dash"})
    if any(q.strip() == "*" for q in quoted) or re.search(r"\basterisks?\b", t):
        return NativeBody("list_format", {"marker": "star"})
    if re.search(r"comma[\s-]separated|separated\s+by\s+commas?", t):
        return NativeBody("list_format", {"marker": "separator", "separator": ","})
    if re.search(r"semicolon[\s-]separated|separated\s+by\s+semicolons?", t):
        return NativeBody("list_format", {"marker": "separator", "separator": ";"})
    if re.search(r"\bbullet", t):
        return NativeBody("list_format", {"marker": "bullet"})
    if re.search(r"new\s+line|separate\s+line|one\s+per\s+line|own\s+line", t):
        return NativeBody("list_format", {"marker": "newline"})
    return None


def _output_format(text: str) -> NativeBody | None:
    t = text.lower()
    negated = _NEGATION.search(t) is not None
    if re.search(r"code\s*blocks?|fenced|```", t):
        lang = None
        m = re.search(rf"\b({'|'.join(CODE_LANGUAGES)})\b", t)
        if m:
            lang = m.group(1)
        params = {"format": "code_block"}
        if lang:
            params["language"] = lang
        return None if negated else NativeBody("output_format", params)
    if re.search(r"plain\s+text", t):
        return NativeBody("output_format", {"format": "plain_text"})
    if re.search(r"bullet", t) and negated:
        return NativeBody("output_format", {"format": "no_bullets"})
    if re.search(r"horizontal\s+rules?|horizontal\s+lines?|dividers?", t) and negated:
        return NativeBody("output_format", {"format": "no_horizontal_rules"})
    if re.search(r"\bbold\b|\*\*", t) and not negated:
        return NativeBody("output_format", {"format": "bold_required"})
    return None


def _language(text: str) -> NativeBody | None:
    t = text.lower()
    for name in sorted(LANGUAGE_NAMES, key=len, reverse=True):
        if re.search(rf"\b{name}\b", t):
            return NativeBody("response_language", {"language": LANGUAGE_NAMES[name]})
    return None


def compile_native(constraint: HardConstraint, approx_band: float = DEFAULT_APPROX_BAND) -> NativeBody | None:
    """Native checker parameters for `constraint`, or None when unparseable."""
    ctype = constraint.type
    text = constraint.constraint
    if ctype in UNITS:
        q = parse_quantity(text, UNITS[ctype], approx_band)
        if q is None:
            return None
        params = dict(q)
        if ctype is ConstraintType.PARAGRAPH_COUNT and re.search(r"\bno\s+horizontal\s+rules?\b", text, re.I):
            params["no_horizontal_rules"] = True
        return NativeBody(ctype.value, params)
    if ctype is ConstraintType.KEYWORD_COUNT:
        kw = _keyword(text)
        return NativeBody("keyword_count", {"keyword": kw, **parse_frequency(text)}) if kw else None
    if ctype is ConstraintType.KEYWORD_EXCLUDE:
        kw = _keyword(text)
        return NativeBody("keyword_exclude", {"keyword": kw}) if kw else None
    if ctype is ConstraintType.RESPONSE_LANGUAGE:
        return _language(text)
    if ctype in (ConstraintType.START_TEXT, ConstraintType.END_TEXT):
        anchor = longest_quoted(text)
        if anchor is None or not anchor.strip():
            return None
        return NativeBody(ctype.value, {"anchor": anchor.strip()})
    if ctype is ConstraintType.LIST_FORMAT:
        return _list_format(text)
    if ctype is ConstraintType.OUTPUT_FORMAT:
        return _output_format(text)
    if ctype is ConstraintType.PUNCTUATION_RULE:
        return _punctuation(text)
    return None
