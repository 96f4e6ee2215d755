"""Multilingual surface statistics used by the checker engine.

Counting rules follow the canonical checker patterns: CJK ideographs in
U+4E00-U+9FFF count one each, Latin words are letter runs optionally joined
by a hyphen or apostrophe.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

_CJK = re.compile(r"[\u4e00-\u9fff]")
_LATIN_WORD = re.compile(r"[a-zA-Z]+(?:[-'][a-zA-Z]+)*")
_PARAGRAPH_BREAK = re.compile(r"\n\s*\n")
_SENTENCE_END = re.compile(r"[.!?\u3002\uff01\uff1f]+")


class UnsupportedLanguage(ValueError):
    pass


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def count_words(text: str) -> int:
    return len(_CJK.findall(text)) + len(_LATIN_WORD.findall(text))


def split_paragraphs(text: str) -> list[str]:
    parts = _PARAGRAPH_BREAK.split(normalize_newlines(text).strip())
    return [p.strip() for p in parts if p.strip()]


def split_sentences(text: str) -> list[str]:
    parts = _SENTENCE_END.split(text.strip())
    return [s.strip() for s in parts if s.strip()]


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def keyword_pattern(keyword: str) -> re.Pattern:
    """Case-insensitive pattern; word boundaries only on word-character ends."""
    if not keyword:
        raise ValueError("keyword must be non-empty")
    pat = re.escape(keyword)
    if _is_word_char(keyword[0]):
        pat = r"\b" + pat
    if _is_word_char(keyword[-1]):
        pat = pat + r"\b"
    return re.compile(pat, re.IGNORECASE)


def keyword_occurrences(text: str, keyword: str) -> int:
    return len(keyword_pattern(keyword).findall(text))


@dataclass(frozen=True)
class TextStats:
    word_count: int
    paragraphs: tuple[str, ...]
    sentences: tuple[str, ...]

    @classmethod
    def of(cls, text: str) -> "TextStats":
        text = normalize_newlines(text)
        return cls(count_words(text), tuple(split_paragraphs(text)), tuple(split_sentences(text)))


# --------------------------------------------------------------------------
# language detection

# Any of these scripts rules out a Latin-script target.
_NON_LATIN = re.compile(r"[\u4e00-\u9fff\u3040-\u30ff\uac00-\ud7af\u0400-\u04ff\u0600-\u06ff]")
_LATIN_LETTER = re.compile(r"[A-Za-z]")

SCRIPT_RANGES = {
    "zh": ((0x4E00, 0x9FFF),),
    "ja": ((0x3040, 0x30FF), (0x4E00, 0x9FFF)),
    "ko": ((0xAC00, 0xD7AF), (0x1100, 0x11FF), (0x3130, 0x318F)),
    "ru": ((0x0400, 0x04FF),),
    "ar": ((0x0600, 0x06FF),),
}

STOPWORDS = {
    "en": ("the", "and", "is", "are", "of", "to", "in", "that", "for", "with", "on", "as"),
    "es": ("el", "la", "los", "las", "de", "que", "y", "en", "un", "una", "es", "por"),
    "fr": ("le", "la", "les", "de", "des", "et", "est", "un", "une", "que", "en", "pour"),
    "ca": ("el", "la", "els", "les", "de", "que", "i", "en", "un", "una", "és", "per"),
}

LANGUAGE_NAMES = {
    "english": "en",
    "spanish": "es",
    "french": "fr",
    "catalan": "ca",
    "simplified chinese": "zh",
    "chinese": "zh",
    "japanese": "ja",
    "korean": "ko",
    "russian": "ru",
    "arabic": "ar",
}

_ASCII_PUNCT = frozenset(string.punctuation)


def _in_ranges(ch: str, ranges) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in ranges)


def _stopword_pattern(lang: str) -> re.Pattern:
    words = "|".join(re.escape(w) for w in STOPWORDS[lang])
    return re.compile(rf"\b(?:{words})\b", re.IGNORECASE)


_STOPWORD_PATTERNS = {lang: _stopword_pattern(lang) for lang in STOPWORDS}


def detect_language(text: str, target: str) -> bool:
    """True when `text` looks written in `target` (ISO 639-1 code or English name).

    Script languages need at least half of the countable characters
    (non-whitespace, non-ASCII-punctuation) in their script range; Japanese
    additionally needs one kana so plain Chinese does not qualify. Latin
    languages use the script-exclusion plus stopword heuristic.
    """
    lang = LANGUAGE_NAMES.get(target.lower(), target.lower())
    if lang not in SCRIPT_RANGES and lang not in STOPWORDS:
        raise UnsupportedLanguage(target)
    text = text.strip()
    if not text:
        return False
    if lang in SCRIPT_RANGES:
        chars = [c for c in text if not c.isspace() and c not in _ASCII_PUNCT]
        if not chars:
            return False
        hits = sum(1 for c in chars if _in_ranges(c, SCRIPT_RANGES[lang]))
        if lang == "ja" and not any(_in_ranges(c, ((0x3040, 0x30FF),)) for c in chars):
            return False
        return 2 * hits >= len(chars)
    if _NON_LATIN.search(text):
        return False
    latin_hits = len(_LATIN_LETTER.findall(text))
    stop_hits = len(_STOPWORD_PATTERNS[lang].findall(text))
    return latin_hits >= 20 and stop_hits >= 2
