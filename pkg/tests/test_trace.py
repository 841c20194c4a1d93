import pytest

from quadcv.trace import TRACE_COLUMNS, RunTrace, TraceRow


def make_row(k, elbo=-1.5):
    return TraceRow(k, 12, elbo, 3.0, 2.0, 1.0, -0.25)


class TestRunTrace:
    def test_append_requires_increasing_iterations(self):
        trace = RunTrace()
        trace.append(make_row(0))
        trace.append(make_row(5))
        with pytest.raises(ValueError):
            trace.append(make_row(5))
        with pytest.raises(ValueError):
            trace.append(make_row(3))

    def test_csv_round_trip(self, tmp_path):
        trace = RunTrace()
        trace.append(make_row(0, elbo=-1.2345678901234567))
        trace.append(make_row(10, elbo=-0.5))
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        again = RunTrace.read_csv(path)
        assert again.rows == trace.rows

    def test_header_is_fixed_schema(self, tmp_path):
        trace = RunTrace()
        trace.append(make_row(0))
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == ",".join(TRACE_COLUMNS)

    def test_read_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            RunTrace.read_csv(path)

    def test_floats_survive_round_trip_exactly(self, tmp_path):
        # repr-based serialization keeps every bit of the double
        value = -0.1 + 0.2 / 3.0
        trace = RunTrace()
        trace.append(make_row(0, elbo=value))
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        assert RunTrace.read_csv(path).rows[0].elbo_estimate == value
