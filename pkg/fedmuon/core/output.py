"""
Trace records and the files they are written to.

Traces stream as JSON Lines, one RoundTrace per line with keys in field
order; a per-round CSV summary sits next to them. Tables meant for people go
to stdout through `write_output`.
"""
import csv
import json
from dataclasses import asdict, dataclass, fields

TRACE_FILE = 'trace.jsonl'
SUMMARY_FILE = 'summary.csv'

SUMMARY_COLUMNS = [
    'round', 'loss', 'loss_global', 'grad_frobenius', 'grad_trace', 'grad_spectral', 'grad_dual',
]


@dataclass(frozen=True)
class RoundTrace:
    round: int
    step: int
    loss: float
    loss_global: float
    grad_frobenius: float
    grad_trace: float
    grad_spectral: float
    grad_schatten_phat: float
    phat: float
    running_kappa: float
    accuracy: float | None = None
    wallclock_ns: int = 0

    def dual_grad(self, norm_tag):
        """Gradient norm in the dual of the oracle's norm."""
        return self.grad_trace if norm_tag == 'spectral' else self.grad_frobenius


def emit_trace(trace):
    return json.dumps(asdict(trace))


def parse_trace(line):
    """
    Raises:
        ValueError: not a JSON object or keys differ from RoundTrace fields
    """
    record = json.loads(line)
    expected = [f.name for f in fields(RoundTrace)]
    if not isinstance(record, dict) or list(record) != expected:
        raise ValueError(f'Trace record must have keys {expected}')
    return RoundTrace(**record)


def write_traces(stream, traces):
    for trace in traces:
        stream.write(emit_trace(trace))
        stream.write('\n')
    stream.flush()


def read_traces(stream):
    return [parse_trace(line) for line in stream if line.strip()]


def summary_rows(traces, norm_tag):
    """One row per round, taken from the record at local step 0 (the point X(r))."""
    rows = []
    for trace in traces:
        if trace.step != 0:
            continue
        rows.append({
            'round': trace.round,
            'loss': trace.loss,
            'loss_global': trace.loss_global,
            'grad_frobenius': trace.grad_frobenius,
            'grad_trace': trace.grad_trace,
            'grad_spectral': trace.grad_spectral,
            'grad_dual': trace.dual_grad(norm_tag),
        })
    return rows


def write_csv(stream, rows, columns):
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    stream.flush()


def write_summary(directory, traces, norm_tag):
    with open(directory / SUMMARY_FILE, 'w', newline='') as f:
        write_csv(f, summary_rows(traces, norm_tag), SUMMARY_COLUMNS)


def write_output(output_stream, output):
    output_stream.write('\n'.join(output))
    output_stream.write('\n')
    output_stream.flush()
