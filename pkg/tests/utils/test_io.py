import io

import pytest

from erasurecast.utils.checks import RejectedInputException
from erasurecast.utils.io import csv_text, format_value, load_json, open_output, read_csv, write_csv


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__format_value():
    assert format_value(None) == ""
    assert format_value(True) == "true"
    assert format_value(0.1) == "0.1"
    assert format_value(1 / 3) == repr(1 / 3)
    assert format_value(7) == "7"


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__write_csv():
    stream = io.StringIO()
    write_csv(stream, "demo", ["a", "b"], [{"a": 1, "b": 0.5}, {"a": 2}])
    assert stream.getvalue() == "# erasurecast demo v1\na,b\n1,0.5\n2,\n"


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__write_csv_rejects_unknown_columns():
    with pytest.raises(RejectedInputException):
        csv_text("demo", ["a"], [{"a": 1, "c": 2}])


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__read_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(csv_text("demo", ["a", "b"], [{"a": 1, "b": "x"}]))
    assert read_csv(str(path)) == [{"a": "1", "b": "x"}]


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__load_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"n_symbols": 3}')
    assert load_json(str(path)) == {"n_symbols": 3}
    path.write_text("[1]")
    with pytest.raises(RejectedInputException):
        load_json(str(path))
    path.write_text("{")
    with pytest.raises(RejectedInputException):
        load_json(str(path))
    with pytest.raises(OSError):
        load_json(str(tmp_path / "missing.json"))


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__open_output(tmp_path, capsys):
    path = tmp_path / "nested" / "out.csv"
    with open_output(str(path)) as f:
        f.write("hello\n")
    assert path.read_text() == "hello\n"

    with open_output("-") as f:
        f.write("to stdout\n")
    assert capsys.readouterr().out == "to stdout\n"
