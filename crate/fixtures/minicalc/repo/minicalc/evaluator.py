"""Evaluate sums of products."""
from minicalc.arith import add, mul
from minicalc.tokens import tokenize


class Evaluator:
    """Stateful expression evaluator."""

    def __init__(self):
        self.history = []

    def evaluate(self, text):
        tokens = tokenize(text)
        value = self._sum(tokens)
        self.history.append(value)
        return value

    def _sum(self, tokens):
        total = 0
        term = []
        for tok in tokens + ["+"]:
            if tok == "+":
                total = add(total, self._product(term))
                term = []
            else:
                term.append(tok)
        return total

    def _product(self, factors):
        value = 1
        for tok in factors:
            if tok != "*":
                value = mul(value, int(tok))
        return value
