# pufApp/utils/artifacts.py
"""CSV and JSON writers. Artifacts are byte-identical for identical (config, seed)."""
import hashlib
from pathlib import Path

import orjson
import pandas as pd

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS
CSV_SCHEMA_VERSION = 1


def config_hash(config):
    """SHA-256 over the canonical (sorted-key) JSON of a config mapping."""
    return hashlib.sha256(orjson.dumps(config, option=JSON_OPTIONS)).hexdigest()


def header_line(digest, version):
    return f"# puflab {version} schema={CSV_SCHEMA_VERSION} config={digest}\n"


def write_csv(path, frame: pd.DataFrame, *, digest, version):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        handle.write(header_line(digest, version))
        frame.to_csv(handle, index=False, lineterminator='\n')
    return path


def append_csv(path, frame: pd.DataFrame, *, digest, version):
    """Append rows; a new file gets the comment line and the column header first."""
    path = Path(path)
    if not path.is_file():
        return write_csv(path, frame, digest=digest, version=version)
    with path.open('a', encoding='utf-8', newline='') as handle:
        frame.to_csv(handle, index=False, header=False, lineterminator='\n')
    return path


def read_csv(path):
    return pd.read_csv(path, comment='#')


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(payload, option=JSON_OPTIONS | orjson.OPT_INDENT_2) + b"\n")
    return path


def write_jsonl(path, events):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('wb') as handle:
        for event in events:
            handle.write(orjson.dumps(event, option=JSON_OPTIONS))
            handle.write(b"\n")
    return path
