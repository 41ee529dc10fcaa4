"""Deterministic file output: CSV, JSON, WAV and a raw float32 container.

Every writer produces the same bytes for the same input. CSV floats use nine
significant digits; JSON keys are sorted.
"""
import csv
import io as _io
import json
import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

FLOAT_FORMAT = "%.9g"
RAW_MAGIC = b"RPF1"


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FORMAT % (float(v) + 0.0)  # no "-0"
    if v is None:
        return ""
    return str(v)


def csv_text(columns, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row[c] for c in columns]
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns, rows):
    path = Path(path)
    path.write_text(csv_text(columns, rows), encoding="utf-8")
    return path


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, complex numbers and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def json_text(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.write_text(json_text(obj), encoding="utf-8")
    return path


def write_wav(path, samples, sample_rate):
    """Mono 32-bit float WAV."""
    rate = int(round(sample_rate))
    if abs(rate - sample_rate) > 1e-9 * sample_rate:
        raise ValueError(f"WAV needs an integer sample rate, got {sample_rate}")
    data = np.asarray(samples, dtype=np.float32)
    if data.ndim != 1:
        raise ValueError("only mono signals are written")
    wavfile.write(str(path), rate, data)
    return Path(path)


def read_wav(path):
    rate, data = wavfile.read(str(path))
    return np.asarray(data, dtype=float), float(rate)


def write_raw(path, header, payload):
    """``RPF1`` magic, uint32 header length, JSON header, little-endian float32 payload."""
    head = json.dumps(to_jsonable(header), sort_keys=True).encode()
    body = np.ascontiguousarray(payload, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(body.tobytes())
    return Path(path)


def read_raw(path):
    blob = Path(path).read_bytes()
    if blob[:4] != RAW_MAGIC:
        raise ValueError(f"{path}: not a raw float32 container")
    (n,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8:8 + n])
    payload = np.frombuffer(blob[8 + n:], dtype="<f4")
    shape = header.get("shape")
    return header, payload.reshape(shape) if shape else payload


def write_signal_raw(path, samples, sample_rate, meta=None):
    samples = np.asarray(samples)
    header = {"sample_rate": sample_rate, "shape": list(samples.shape), "dtype": "float32le"}
    header.update(meta or {})
    return write_raw(path, header, samples)


def write_spectrogram_raw(path, spec, meta=None):
    """Interleaved ``(re, im)`` float32 payload with the STFT settings in the header."""
    c = spec.config
    data = np.asarray(spec.data)
    inter = np.stack([data.real, data.imag], axis=-1)
    header = {"shape": list(inter.shape), "layout": "frames,bins,(re,im)",
              "window_length": c.window_length, "hop": c.hop, "window": c.window,
              "sample_rate": c.sample_rate, "center": c.center, "length": spec.length}
    header.update(meta or {})
    return write_raw(path, header, inter)


def write_spectrogram_csv(path_prefix, spec):
    """``<prefix>_mag.csv`` and ``<prefix>_phase.csv``, one row per frame."""
    cols = [f"bin{k}" for k in range(spec.data.shape[1])]
    mag = write_csv(f"{path_prefix}_mag.csv", cols, np.abs(spec.data).tolist())
    ph = write_csv(f"{path_prefix}_phase.csv", cols, np.angle(spec.data).tolist())
    return mag, ph
