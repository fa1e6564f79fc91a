import csv
import pytest
from io import StringIO
from pathlib import Path

from fedmuon.core.output import (
    SUMMARY_COLUMNS,
    SUMMARY_FILE,
    RoundTrace,
    emit_trace,
    parse_trace,
    read_traces,
    summary_rows,
    write_output,
    write_summary,
    write_traces,
)
from fedmuon.fedproto import run
from fedmuon.modes.counterexample import counterexample_config
from fedmuon.problems import CounterexampleProblem

DATA_DIR = Path(__file__).parent / 'data'


def make_trace(round=0, step=0, **overrides):
    values = dict(
        round=round,
        step=step,
        loss=0.15625,
        loss_global=0.15625,
        grad_frobenius=0.25,
        grad_trace=0.5,
        grad_spectral=0.2,
        grad_schatten_phat=0.3,
        phat=1.5,
        running_kappa=0.4,
    )
    values.update(overrides)
    return RoundTrace(**values)


def test_write_output_to_stream():
    """Test writing output to a stream"""
    output_stream = StringIO()
    data = ["line1", "line2", "line3"]

    write_output(output_stream, data)

    assert output_stream.getvalue() == "line1\nline2\nline3\n"


def test_write_output_empty_list():
    """Test writing empty list"""
    output_stream = StringIO()

    write_output(output_stream, [])

    assert output_stream.getvalue() == "\n"


def test_emit_trace_key_order():
    """Test JSONL keys follow the documented field order"""
    line = emit_trace(make_trace())

    assert line == (
        '{"round": 0, "step": 0, "loss": 0.15625, "loss_global": 0.15625, '
        '"grad_frobenius": 0.25, "grad_trace": 0.5, "grad_spectral": 0.2, '
        '"grad_schatten_phat": 0.3, "phat": 1.5, "running_kappa": 0.4, '
        '"accuracy": null, "wallclock_ns": 0}'
    )


def test_parse_trace_round_trip_awkward_floats():
    """Test floats that are not short decimals survive emit/parse"""
    trace = make_trace(loss=0.1 + 0.2, grad_trace=1 / 3, accuracy=2 / 3, wallclock_ns=12345)

    assert parse_trace(emit_trace(trace)) == trace


def test_parse_trace_rejects_missing_key():
    """Test records with missing keys are rejected"""
    with pytest.raises(ValueError):
        parse_trace('{"round": 0, "step": 0}')


def test_parse_trace_rejects_reordered_keys():
    """Test records with keys out of order are rejected"""
    line = emit_trace(make_trace()).replace('{"round": 0, "step": 0', '{"step": 0, "round": 0')

    with pytest.raises(ValueError):
        parse_trace(line)


def test_write_and_read_traces():
    """Test a stream of traces reads back in order"""
    traces = [make_trace(round=r, step=k) for r in range(3) for k in range(2)]
    stream = StringIO()

    write_traces(stream, traces)
    stream.seek(0)

    assert read_traces(stream) == traces
    assert stream.getvalue().count('\n') == 6


def test_summary_rows_use_step_zero():
    """Test the summary has one row per round taken at step 0"""
    traces = [make_trace(round=r, step=k, loss=float(10 * r + k)) for r in range(3) for k in range(3)]

    rows = summary_rows(traces, 'spectral')

    assert [row['round'] for row in rows] == [0, 1, 2]
    assert [row['loss'] for row in rows] == [0.0, 10.0, 20.0]


@pytest.mark.parametrize('norm_tag, expected', [
    ('spectral', 0.5),
    ('frobenius', 0.25),
    ('euclidean_vec', 0.25),
])
def test_summary_dual_gradient(norm_tag, expected):
    """Test grad_dual is the trace norm for spectral and Frobenius otherwise"""
    rows = summary_rows([make_trace()], norm_tag)

    assert rows[0]['grad_dual'] == expected


def test_write_summary_file(tmp_path):
    """Test write_summary writes one summary.csv row per round"""
    traces = [make_trace(round=r, step=k) for r in range(4) for k in range(2)]

    write_summary(tmp_path, traces, 'spectral')

    with open(tmp_path / SUMMARY_FILE, newline='') as f:
        reader = csv.DictReader(f)
        assert reader.fieldnames == SUMMARY_COLUMNS
        rows = list(reader)
    assert [row['round'] for row in rows] == ['0', '1', '2', '3']


def test_counterexample_trace_matches_golden_file():
    """Test five LocalMuon rounds on the counterexample emit the stored records byte for byte"""
    traces = run(counterexample_config('localmuon', 0.5, 0.01), CounterexampleProblem(a=1.0), 5)
    stream = StringIO()

    write_traces(stream, traces)

    assert stream.getvalue() == (DATA_DIR / 'counterexample_localmuon.jsonl').read_text()
