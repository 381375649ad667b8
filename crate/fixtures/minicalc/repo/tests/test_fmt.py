from minicalc import fmt


def test_format_result():
    assert fmt.format_result(1234567) == "1,234,567"
    assert fmt.format_result(-42) == "-42"
