"""CSV and JSON writers that carry a manifest.

CSV files start with `# key: value` lines, then a header row; JSON documents get a `manifest` key.
"""
import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from critforest.scaling import settings


def _as_dict(manifest) -> dict:
    if manifest is None:
        return {}
    return manifest.to_dict() if hasattr(manifest, 'to_dict') else dict(manifest)


def manifest_lines(manifest) -> List[str]:
    return [f'# {key}: {value}' for key, value in sorted(_as_dict(manifest).items())]


def split_manifest(lines: Sequence[str]) -> Tuple[Dict[str, str], List[str]]:
    """Leading `# key: value` lines as a dictionary, and the lines after them"""
    manifest, position = {}, 0
    for position, line in enumerate(lines):
        if not line.startswith('# ') or ': ' not in line or line.startswith('# forest '):
            break
        key, value = line[2:].split(': ', 1)
        manifest[key] = value
    else:
        position = len(lines)
    return manifest, list(lines[position:])


def _format(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path: Optional[Path], columns: Sequence[str], rows: Iterable[Sequence[Any]], manifest=None) -> str:
    """Write rows under a header; returns the text, and writes nothing when path is None"""
    buffer = io.StringIO()
    for line in manifest_lines(manifest):
        buffer.write(line + '\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(value) for value in row])
    text = buffer.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
    return text


def read_csv(path: Path) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    manifest, lines = split_manifest(Path(path).read_text(encoding='utf-8').splitlines())
    return manifest, list(csv.DictReader(lines))


def dumps_json(document: Mapping[str, Any], manifest=None) -> str:
    document = dict(document)
    document.setdefault('schema_version', settings.SCHEMA_VERSION)
    if manifest is not None:
        document['manifest'] = _as_dict(manifest)
    return json.dumps(document, sort_keys=True, ensure_ascii=False, indent=1) + '\n'


def write_json(path: Optional[Path], document: Mapping[str, Any], manifest=None) -> str:
    text = dumps_json(document, manifest)
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
    return text


def read_json(path: Path) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding='utf-8'))
