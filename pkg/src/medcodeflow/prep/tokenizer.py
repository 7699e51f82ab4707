"""Desk-scale tokenizer for packing experiments.

Splits on word boundaries and isolates punctuation. Token ids are
stable hashes so that identical text always produces identical id
streams without a fitted vocabulary; id 0 is reserved for the packing
delimiter. Production tokenizers plug in behind the same three-method
interface, and the packing invariants do not depend on which one is
used.
"""

from __future__ import annotations

import re
from typing import Protocol

from ..hashing import stable_hash64

DELIMITER_ID = 0

_ID_SPACE = 2**31 - 2

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class Tokenizer(Protocol):
    def tokenize(self, text: str) -> list[str]: ...

    def encode(self, text: str) -> list[int]: ...

    def count(self, text: str) -> int: ...


class WhitespaceTokenizer:
    """Word and punctuation tokens with hashed ids in [1, 2^31 - 2]."""

    def tokenize(self, text: str) -> list[str]:
        return _TOKEN_RE.findall(text)

    def encode(self, text: str) -> list[int]:
        return [stable_hash64(token) % _ID_SPACE + 1 for token in self.tokenize(text)]

    def count(self, text: str) -> int:
        return len(self.tokenize(text))
