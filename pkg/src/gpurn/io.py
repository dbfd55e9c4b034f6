"""Flat-file formats: urn specs and results as JSON, tables as CSV."""

import csv
import io
import json
import math

import numpy as np

from .urn_model import SpecValidationError, UrnSpec

CSV_DIGITS = 15

DIST_HEADER = ("m", "psi", "probability")
PATH_HEADER = ("j", "tau", "phi", "velocity", "psi")
MOGULSKII_HEADER = ("alpha", "xi", "beta_star", "L0_unshifted", "L0_shifted")
PROFILE_HEADER = ("j", "tau", "velocity", "psi", "local_rate", "cramer_rate")


def load_spec(path):
    """Read an urn spec from a JSON file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecValidationError("spec file is not valid JSON: %s" % exc) from exc
    return UrnSpec.from_dict(doc)


def dump_spec(spec, path):
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return "%.*g" % (CSV_DIGITS, value)


def format_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(header, rows))


def read_csv(path):
    """Read a table written by :func:`write_csv` into ``(header, float array)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        rows = [[float(x) if x else math.nan for x in row] for row in reader]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def format_json(doc):
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_json(path, doc):
    with open(path, "w") as fh:
        fh.write(format_json(doc))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def distribution_rows(probs, N):
    return [(m, m / N, p) for m, p in enumerate(probs)]


def path_rows(path):
    psi = path.averages
    vel = np.append(path.velocities, np.nan)
    return [(j, t, phi, v, s)
            for j, (t, phi, v, s) in enumerate(zip(path.tau, path.values, vel, psi))]
