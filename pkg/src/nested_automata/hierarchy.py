"""Text as a nested hierarchy of symbol sequences.

Letters form words (S^R), words form sentences ((S^R)^R'), sentences form
paragraphs and paragraphs a document. A text is encoded into a dense array
of shape (paragraphs, sentences, words, letters) sized by the configured
extents, with ragged lengths padded.

Splitting rules (each is inverted exactly by the matching join):
    - paragraphs: split on "\\n"
    - sentences: split after every "."
    - words: split on " "

Codes 0 and 1 are reserved: PAD fills unused slots and END marks a present
but empty word. Letters take codes 2, 3, ... in table order.
"""

import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

logger = logging.getLogger(__name__)

PAD = 0
END = 1
FIRST_LETTER_CODE = 2

LEVELS = ("word", "sentence", "paragraph", "document")

# Printable ASCII without the space and newline separators, plus tab and CR.
DEFAULT_LETTERS = "\t\r" + "".join(chr(c) for c in range(0x21, 0x7F))

SENTENCE_SPLIT = re.compile(r"(?<=\.)")


class TextEncodingError(ValueError):
    """Raised when a text does not fit the extents or the letter table.

    Attributes:
        level: Hierarchy level at fault, or None for letter-table errors.
    """

    def __init__(self, message: str, level: Optional[str] = None) -> None:
        self.level = level
        super().__init__(message)


@dataclass
class HierarchyText:
    """A text encoded as nested symbol sequences.

    Attributes:
        codes: Array of shape (paragraphs, sentences, words, letters).
        letters: Letter table; letter i has code i + 2.
        extents: (word, sentence, paragraph, document) extents.
    """

    codes: np.ndarray
    letters: str
    extents: tuple[int, int, int, int]

    @property
    def alphabet_size(self) -> int:
        return FIRST_LETTER_CODE + len(self.letters)

    def to_payload(self) -> dict[str, Any]:
        return {
            "letters": self.letters,
            "extents": list(self.extents),
            "codes": self.codes.tolist(),
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "HierarchyText":
        try:
            extents = tuple(int(e) for e in payload["extents"])
            letters = str(payload["letters"])
            codes = np.asarray(payload["codes"], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as e:
            raise TextEncodingError(f"Malformed hierarchy document: {e}") from e
        if len(extents) != 4:
            raise TextEncodingError("Hierarchy extents need four entries")
        word, sentence, paragraph, document = extents
        if codes.shape != (document, paragraph, sentence, word):
            raise TextEncodingError(
                f"Code array has shape {codes.shape}, expected "
                f"{(document, paragraph, sentence, word)}"
            )
        return cls(codes, letters, (word, sentence, paragraph, document))


def _check_fits(count: int, extent: int, level: str, container: str) -> None:
    if count > extent:
        raise TextEncodingError(
            f"{container} has {count} entries but the {level} extent is {extent}",
            level,
        )


def encode_text(
    text: str,
    extents: Sequence[int],
    letters: str = DEFAULT_LETTERS,
    max_symbols: Optional[int] = None,
) -> HierarchyText:
    """Encode ``text`` into a padded (paragraph, sentence, word, letter) array.

    Args:
        text: Text to encode.
        extents: (letters per word, words per sentence, sentences per
            paragraph, paragraphs per document).
        letters: Letter table, distinct characters.
        max_symbols: Optional bound on the alphabet size |S|.

    Raises:
        TextEncodingError: If a level overflows its extent (the error names
            the level), a character is not in the table, or the table does
            not fit max_symbols.

    Example:
        >>> encoded = encode_text("ab cd. ef.", (4, 4, 4, 2))
        >>> decode_text(encoded)
        'ab cd. ef.'
    """
    word_extent, sentence_extent, paragraph_extent, document_extent = (
        int(e) for e in extents
    )
    if len(set(letters)) != len(letters):
        raise TextEncodingError("Letter table contains duplicates")
    if " " in letters or "\n" in letters:
        raise TextEncodingError("Space and newline are separators, not letters")
    alphabet_size = FIRST_LETTER_CODE + len(letters)
    if max_symbols is not None and alphabet_size > max_symbols:
        raise TextEncodingError(
            f"Letter table needs {alphabet_size} symbols, alphabet holds {max_symbols}"
        )
    code_of = {letter: FIRST_LETTER_CODE + i for i, letter in enumerate(letters)}
    codes = np.full(
        (document_extent, paragraph_extent, sentence_extent, word_extent),
        PAD,
        dtype=np.int64,
    )

    paragraphs = text.split("\n")
    _check_fits(len(paragraphs), document_extent, "document", "Document")
    for p, paragraph in enumerate(paragraphs):
        sentences = SENTENCE_SPLIT.split(paragraph)
        _check_fits(len(sentences), paragraph_extent, "paragraph", f"Paragraph {p}")
        for s, sentence in enumerate(sentences):
            words = sentence.split(" ")
            container = f"Sentence {s} of paragraph {p}"
            _check_fits(len(words), sentence_extent, "sentence", container)
            for w, word in enumerate(words):
                _check_fits(len(word), word_extent, "word", f"Word {word!r}")
                if not word:
                    codes[p, s, w, 0] = END
                    continue
                for i, letter in enumerate(word):
                    try:
                        codes[p, s, w, i] = code_of[letter]
                    except KeyError as e:
                        raise TextEncodingError(
                            f"Character {letter!r} is not in the letter table"
                        ) from e
    logger.debug(
        "Encoded %d characters into %d paragraphs", len(text), len(paragraphs)
    )
    extents_used = (word_extent, sentence_extent, paragraph_extent, document_extent)
    return HierarchyText(codes, letters, extents_used)


def _present(slot: np.ndarray) -> bool:
    """A slot is present when its first code is not PAD."""
    return bool(slot.reshape(-1)[0] != PAD)


def decode_text(encoded: HierarchyText) -> str:
    """Inverse of encode_text().

    Raises:
        TextEncodingError: If a code is outside the letter table.
    """
    letter_of = {
        FIRST_LETTER_CODE + i: letter for i, letter in enumerate(encoded.letters)
    }
    paragraphs = []
    for paragraph in encoded.codes:
        if not _present(paragraph):
            break
        sentences = []
        for sentence in paragraph:
            if not _present(sentence):
                break
            words = []
            for word in sentence:
                if not _present(word):
                    break
                chars = []
                for code in word:
                    code = int(code)
                    if code in (PAD, END):
                        break
                    try:
                        chars.append(letter_of[code])
                    except KeyError as e:
                        raise TextEncodingError(
                            f"Code {code} is not a letter code"
                        ) from e
                words.append("".join(chars))
            sentences.append(" ".join(words))
        paragraphs.append("".join(sentences))
    return "\n".join(paragraphs)
