"""Sub-word tokenization shared by the token encoder and the graph leaves."""
from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from ..errors import FormatError, MissingFile

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIALS = ("<pad>", "<unk>", "<s>", "</s>")

# >> and >>> are left out on purpose: they collide with nested generics in Java.
_OPERATORS = (
    r"<<=|\+\+|--|&&|\|\||==|!=|<=|>=|\+=|-=|\*=|/=|%=|&=|\|=|\^=|->|::|<<|\*\*|//"
)
_LEXEME = re.compile(
    rf"(?P<word>[^\W\d][\w$]*|\$[\w$]*)|(?P<num>\d+(?:\.\d+)?)|(?P<op>{_OPERATORS})|(?P<punct>\S)"
)
_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+|[^\W\d_a-zA-Z]+|\$")


def split_identifier(word: str) -> list[str]:
    """Split an identifier on underscores (kept as tokens) and camelCase humps."""
    out = []
    for piece in re.split(r"(_)", word):
        if not piece:
            continue
        if piece == "_":
            out.append("_")
        else:
            out.extend(m.lower() for m in _CAMEL.findall(piece))
    return out


class Tokenizer(Protocol):
    def split(self, text: str) -> list[str]: ...


class HeuristicTokenizer:
    """Deterministic, training-free splitter: camelCase, snake_case, punctuation, lowercase.

    >>> HeuristicTokenizer().split("num_a = getValue(x)")
    ['num', '_', 'a', '=', 'get', 'value', '(', 'x', ')']
    """

    name = "heuristic"

    def split(self, text: str) -> list[str]:
        tokens = []
        for m in _LEXEME.finditer(text):
            if m.lastgroup == "word":
                tokens.extend(split_identifier(m.group()))
            elif m.lastgroup == "punct":
                tokens.append(m.group())
            else:
                tokens.append(m.group().lower())
        return tokens


class WordPieceTokenizer:
    """Greedy longest-match sub-word splitting against an external vocabulary.

    Words are pre-split with the heuristic rules, then each word is cut into the
    longest pieces found in ``pieces``; continuation pieces carry ``prefix``.
    Words that cannot be covered fall back to a single UNK-mapped token.
    """

    name = "wordpiece"

    def __init__(self, pieces: Iterable[str], prefix: str = "##", lowercase: bool = True):
        self.pieces = frozenset(pieces)
        self.prefix = prefix
        self.lowercase = lowercase
        self._pre = HeuristicTokenizer()

    def split(self, text: str) -> list[str]:
        out = []
        for word in self._pre.split(text if not self.lowercase else text.lower()):
            start, sub = 0, []
            while start < len(word):
                end = len(word)
                while end > start:
                    cand = word[start:end] if start == 0 else self.prefix + word[start:end]
                    if cand in self.pieces:
                        sub.append(cand)
                        break
                    end -= 1
                else:
                    sub = [word]
                    break
                start = end
            out.extend(sub)
        return out


@dataclass(frozen=True)
class TokenSequence:
    tokens: list[str]
    ids: list[int]

    def __len__(self):
        return len(self.tokens)


class Vocabulary:
    """Immutable token <-> id table. Ids 0-3 are PAD/UNK/BOS/EOS."""

    def __init__(self, tokens: Sequence[str], tokenizer: Tokenizer | None = None):
        tokens = list(tokens)
        if tuple(tokens[:4]) != SPECIALS:
            tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self._tokens = tuple(tokens)
        self._index = {t: i for i, t in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise FormatError("vocabulary contains duplicate entries")
        self.tokenizer = tokenizer or HeuristicTokenizer()

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]], min_count: int = 1,
              max_size: int | None = None, tokenizer: Tokenizer | None = None) -> "Vocabulary":
        counts = Counter()
        for toks in token_lists:
            counts.update(toks)
        ranked = sorted((t for t, c in counts.items() if c >= min_count and t not in SPECIALS),
                        key=lambda t: (-counts[t], t))
        if max_size is not None:
            ranked = ranked[: max(0, max_size - len(SPECIALS))]
        return cls(list(SPECIALS) + ranked, tokenizer)

    @classmethod
    def load(cls, path, tokenizer: Tokenizer | None = None) -> "Vocabulary":
        path = Path(path)
        if not path.exists():
            raise MissingFile(f"vocabulary file not found: {path}")
        tokens = path.read_text(encoding="utf-8").split("\n")
        if tokens and tokens[-1] == "":
            tokens.pop()
        if len(tokens) < 4:
            raise FormatError(f"vocabulary file {path} has fewer than 4 reserved entries")
        return cls(tokens, tokenizer)

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self._tokens) + "\n", encoding="utf-8")

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def digest(self) -> str:
        return hashlib.sha256("\n".join(self._tokens).encode()).hexdigest()[:16]

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._index

    def id(self, token: str) -> int:
        return self._index.get(token, UNK)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._index.get(t, UNK) for t in tokens]

    def split(self, text: str) -> list[str]:
        return self.tokenizer.split(text)


def tokenize(code: str, vocab: Vocabulary, max_len: int | None = None) -> TokenSequence:
    """Split ``code`` with the vocabulary's tokenizer, map to ids, truncate to ``max_len``."""
    tokens = vocab.split(code)
    if max_len is not None:
        tokens = tokens[:max_len]
    return TokenSequence(tokens, vocab.encode(tokens))
