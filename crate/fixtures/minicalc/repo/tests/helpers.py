from minicalc.evaluator import Evaluator


def make_evaluator():
    return Evaluator()
