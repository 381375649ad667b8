"""Tokenizer for small arithmetic expressions."""


def is_digit(ch):
    return ch in "0123456789"


def tokenize(text):
    """Split an arithmetic expression into tokens."""
    tokens = []
    number = ""
    for ch in text:
        if is_digit(ch):
            number += ch
            continue
        if number:
            tokens.append(number)
            number = ""
        if ch in "+*":
            tokens.append(ch)
    if number:
        tokens.append(number)
    return tokens
