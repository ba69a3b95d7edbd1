from .extend import extend_ast
from .parsing import LANGUAGES, SourceSnippet, parse_java, parse_python, parse_source, strip_comments
from .tokenizer import (BOS, EOS, PAD, SPECIALS, UNK, HeuristicTokenizer, TokenSequence,
                        Vocabulary, WordPieceTokenizer, split_identifier, tokenize)
from .tree import SPLIT_NODE, AstNode, ExtendedAst

__all__ = [
    "AstNode", "BOS", "EOS", "ExtendedAst", "HeuristicTokenizer", "LANGUAGES", "PAD", "SPECIALS",
    "SPLIT_NODE", "SourceSnippet", "TokenSequence", "UNK", "Vocabulary", "WordPieceTokenizer",
    "extend_ast", "parse_java", "parse_python", "parse_source", "split_identifier",
    "strip_comments", "tokenize",
]
