"""Tab-delimited sectioned reports.

A report is a sequence of sections::

    [section-name]
    key<TAB>value            (key/value sections)
    col1<TAB>col2<TAB>...    (table sections: header row, then data rows)

Lines starting with ``#`` are comments. The only non-reproducible line is
``timestamp`` in the ``[run]`` section, omitted when timestamps are disabled.
"""

import datetime


def fmt(x, digits=6):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        s = f"{x:.{digits}f}"
        return "0." + "0" * digits if s == "-0." + "0" * digits else s
    if x is None:
        return "-"
    return str(x)


class Report:
    def __init__(self, command, timestamp=True):
        self.sections = []
        run = [("command", command)]
        if timestamp:
            now = datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)
            run.append(("timestamp", now.isoformat()))
        self.add_kv("run", run)

    def add_kv(self, name, items):
        self.sections.append((name, [(k, fmt(v)) for k, v in items]))

    def add_table(self, name, header, rows):
        body = [tuple(header)] + [tuple(fmt(v) for v in r) for r in rows]
        self.sections.append((name, body))

    def render(self):
        out = ["# hma-perception report"]
        for name, rows in self.sections:
            out.append(f"[{name}]")
            out.extend("\t".join(str(c) for c in r) for r in rows)
        return "\n".join(out) + "\n"

    def write(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.render())


def parse_report(text):
    """Inverse of :meth:`Report.render`: ``{section: [list of fields per line]}``."""
    sections = {}
    current = None
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is not None:
            sections[current].append(line.split("\t"))
    return sections


def accuracy_rows(table, method="baseline"):
    """Per-class True/False rows plus the integer accuracy rate."""
    header = ["Method", "Row"] + [str(i + 1) for i in range(table.n_classes)] + ["Accuracy rate [%]"]
    rows = [
        [method, "True"] + list(table.true) + [table.accuracy_display],
        [method, "False"] + list(table.false) + [""],
    ]
    return header, rows
