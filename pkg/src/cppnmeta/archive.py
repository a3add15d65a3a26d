"""Append-only archive of evaluated individuals, families and fronts.

File layout (all integers little-endian)::

    header   8s magic b"CPPNARCH" | u16 format version | u16 flags | u32 reserved
    record   u32 payload length | u32 CRC-32 of payload | payload

Each payload is a zlib-compressed UTF-8 JSON object (one
:class:`ArchiveRecord`). A sidecar ``<file>.idx`` holds one line
``run_id<TAB>id<TAB>offset`` per record and can always be rebuilt by a scan.
Readers stop at a truncated tail, so a concurrent reader sees a consistent
prefix of what the single writer has flushed.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import os
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import cppn
from .errors import ArchiveFormatError, DuplicateKeyError
from .geometry import build_mesh, develop, get_group, make_cloud
from .moea.indicators import non_dominated_mask

MAGIC = b"CPPNARCH"
FORMAT_VERSION = 1
HEADER = struct.Struct("<8sHHI")
RECORD_HEAD = struct.Struct("<II")
MAX_RECORD = 64 * 1024 * 1024

TENSOR_FIELDS = ("C11", "C12", "C13", "C22", "C23", "C33", "E", "nu")


@dataclass
class ArchiveRecord:
    run_id: str
    generation: int
    id: int
    genome: dict
    symmetry: str
    cv: float
    fitness: list[float] | None = None
    tensor: dict | None = None
    resolution: int = 35
    error: str | None = None
    objectives: list[list[str]] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, int]:
        return (self.run_id, self.id)

    @property
    def feasible(self) -> bool:
        return self.cv == 0 and self.fitness is not None

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ArchiveRecord":
        data = json.loads(text)
        return cls(**data)

    def load_genome(self):
        return cppn.from_dict(self.genome)


def encode_record(record: ArchiveRecord) -> bytes:
    payload = zlib.compress(record.to_json().encode("utf-8"), 9)
    return RECORD_HEAD.pack(len(payload), zlib.crc32(payload)) + payload


def _decode_payload(payload: bytes, crc: int) -> ArchiveRecord:
    if zlib.crc32(payload) != crc:
        raise ArchiveFormatError("checksum mismatch")
    try:
        return ArchiveRecord.from_json(zlib.decompress(payload).decode("utf-8"))
    except (zlib.error, UnicodeDecodeError, ValueError, TypeError) as exc:
        raise ArchiveFormatError(f"undecodable record: {exc}") from exc


def _check_header(raw: bytes):
    if len(raw) < HEADER.size:
        raise ArchiveFormatError("file too short for an archive header")
    magic, version, _, _ = HEADER.unpack(raw[: HEADER.size])
    if magic != MAGIC:
        raise ArchiveFormatError("not an archive file")
    if version != FORMAT_VERSION:
        raise ArchiveFormatError(f"unsupported archive version {version}")


@dataclass
class ScanStats:
    records: int = 0
    skipped: int = 0
    truncated: bool = False
    end_offset: int = HEADER.size

    @property
    def skipped_fraction(self) -> float:
        total = self.records + self.skipped
        return self.skipped / total if total else 0.0


def scan(path, stats: ScanStats | None = None) -> Iterator[tuple[int, ArchiveRecord]]:
    """Yield ``(offset, record)`` pairs; corrupt records are skipped and counted."""
    stats = stats if stats is not None else ScanStats()
    with open(path, "rb") as fh:
        _check_header(fh.read(HEADER.size))
        offset = HEADER.size
        while True:
            head = fh.read(RECORD_HEAD.size)
            if len(head) < RECORD_HEAD.size:
                stats.truncated = len(head) > 0
                break
            length, crc = RECORD_HEAD.unpack(head)
            if length > MAX_RECORD:
                stats.truncated = True
                break
            payload = fh.read(length)
            if len(payload) < length:
                stats.truncated = True
                break
            try:
                rec = _decode_payload(payload, crc)
            except ArchiveFormatError:
                stats.skipped += 1
            else:
                stats.records += 1
                yield offset, rec
            offset += RECORD_HEAD.size + length
            stats.end_offset = offset


def read_archive(path) -> tuple[list[ArchiveRecord], ScanStats]:
    stats = ScanStats()
    records = [rec for _, rec in scan(path, stats)]
    return records, stats


class ArchiveWriter:
    """Single writer. Opening an existing archive resumes appending after its last whole record."""

    def __init__(self, path, overwrite: bool = False):
        self.path = Path(path)
        self.index_path = self.path.with_name(self.path.name + ".idx")
        self._keys: set[tuple[str, int]] = set()
        if overwrite or not self.path.exists():
            with open(self.path, "wb") as fh:
                fh.write(HEADER.pack(MAGIC, FORMAT_VERSION, 0, 0))
            self.index_path.write_text("")
            end = HEADER.size
        else:
            stats = ScanStats()
            lines = []
            for off, rec in scan(self.path, stats):
                self._keys.add(rec.key)
                lines.append(f"{rec.run_id}\t{rec.id}\t{off}\n")
            end = stats.end_offset
            self.index_path.write_text("".join(lines))
        self._fh = open(self.path, "r+b")
        self._fh.seek(end)
        self._fh.truncate()
        self._idx = open(self.index_path, "a", encoding="utf-8")
        self.bytes_written = 0
        self.count = 0

    def __contains__(self, key) -> bool:
        return tuple(key) in self._keys

    def append(self, record: ArchiveRecord) -> int:
        """Write one record and return its offset."""
        if record.key in self._keys:
            raise DuplicateKeyError(f"record {record.key} already archived")
        blob = encode_record(record)
        offset = self._fh.tell()
        self._fh.write(blob)
        self._idx.write(f"{record.run_id}\t{record.id}\t{offset}\n")
        self._keys.add(record.key)
        self.bytes_written += len(blob)
        self.count += 1
        return offset

    def flush(self):
        self._fh.flush()
        self._idx.flush()
        os.fsync(self._fh.fileno())

    def close(self):
        if self._fh is not None:
            self.flush()
            self._fh.close()
            self._idx.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def load_index(path) -> dict[tuple[str, int], int]:
    """Offsets by ``(run_id, id)`` from the sidecar index."""
    out = {}
    idx = Path(str(path) + ".idx")
    for line in idx.read_text(encoding="utf-8").splitlines():
        run_id, rid, off = line.split("\t")
        out[(run_id, int(rid))] = int(off)
    return out


def read_record_at(path, offset: int) -> ArchiveRecord:
    with open(path, "rb") as fh:
        _check_header(fh.read(HEADER.size))
        fh.seek(offset)
        length, crc = RECORD_HEAD.unpack(fh.read(RECORD_HEAD.size))
        return _decode_payload(fh.read(length), crc)


# ---------------------------------------------------------------- reconstruction


def reconstruct(record: ArchiveRecord, resolution: int | None = None, mesher: str = "structured"):
    """Re-run the geometry pipeline for an archived genome; returns ``(field, mesh)``."""
    group = get_group(record.symmetry)
    cloud = make_cloud(group, resolution or record.resolution,
                       int(record.extra.get("connectivity", 8)))
    threshold = float(record.extra.get("threshold", 0.5))
    sampled = develop(record.load_genome(), group, cloud, threshold)
    mesh = build_mesh(sampled, cloud, mesher, group.rhombic)
    return sampled, mesh


# ---------------------------------------------------------------- families


@dataclass(frozen=True)
class Family:
    family_id: int
    representative: int
    members: tuple[int, ...]


def cluster_families(genomes: Sequence[tuple[int, cppn.Genome]], coeffs=(0.5, 0.5, 1.0),
                     threshold: float = 1.35, include_bias: bool = True) -> list[Family]:
    """Sequential speciation in the given order: first family whose representative is close enough."""
    if not genomes:
        raise ValueError("need at least one genome")
    if threshold <= 0 or any(c < 0 for c in coeffs):
        raise ValueError("threshold must be positive and coefficients non-negative")
    reps: list[tuple[int, cppn.Genome]] = []
    members: list[list[int]] = []
    for gid, g in genomes:
        for k, (_, rep) in enumerate(reps):
            if cppn.similarity(g, rep, coeffs, include_bias) < threshold:
                members[k].append(gid)
                break
        else:
            reps.append((gid, g))
            members.append([gid])
    return [Family(k, reps[k][0], tuple(ms)) for k, ms in enumerate(members)]


# ---------------------------------------------------------------- fronts and tables


def pareto_front(records: Sequence[ArchiveRecord]) -> list[ArchiveRecord]:
    """Records whose fitness is not dominated by any other record (minimization)."""
    if not records:
        return []
    if any(not r.feasible for r in records):
        raise ValueError("pareto_front expects feasible records only")
    f = np.array([r.fitness for r in records], float)
    mask = non_dominated_mask(f)
    return [r for r, keep in zip(records, mask) if keep]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _objective_columns(objectives) -> list[str]:
    return [f"obj_{name}" for name, _ in objectives]


def front_csv(records: Sequence[ArchiveRecord]) -> str:
    """Front table: one row per non-dominated record, properties in natural sign."""
    feasible = [r for r in records if r.feasible]
    front = sorted(pareto_front(feasible), key=lambda r: (tuple(r.fitness), r.run_id, r.id))
    objectives = front[0].objectives if front and front[0].objectives else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["run_id", "generation", "id"]
    if objectives:
        head += _objective_columns(objectives)
    else:
        head += [f"f{k + 1}" for k in range(len(front[0].fitness) if front else 0)]
    head += ["cv", *TENSOR_FIELDS]
    w.writerow(head)
    for r in front:
        if objectives:
            vals = [-v if d == "maximize" else v for v, (_, d) in zip(r.fitness, objectives)]
        else:
            vals = list(r.fitness)
        tensor = r.tensor or {}
        w.writerow([r.run_id, r.generation, r.id, *map(_fmt, vals), _fmt(r.cv),
                    *(_fmt(tensor.get(k)) for k in TENSOR_FIELDS)])
    return buf.getvalue()


def tensor_csv(records: Iterable[ArchiveRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "id", "cv", *TENSOR_FIELDS])
    for r in records:
        tensor = r.tensor or {}
        w.writerow([r.generation, r.id, _fmt(r.cv), *(_fmt(tensor.get(k)) for k in TENSOR_FIELDS)])
    return buf.getvalue()


def family_tables(records: Sequence[ArchiveRecord], families: Sequence[Family]) -> tuple[str, str]:
    """Membership CSV and a per-family property summary CSV.

    Family member ids are positions in ``records``.
    """
    mem = io.StringIO()
    w = csv.writer(mem, lineterminator="\n")
    w.writerow(["family", "run_id", "id", "generation", "representative", "cv", "E", "nu"])
    summ = io.StringIO()
    s = csv.writer(summ, lineterminator="\n")
    s.writerow(["family", "run_id", "representative_id", "size", "feasible",
                "E_mean", "E_max", "nu_mean", "nu_min", "nu_max"])
    for fam in families:
        es, nus = [], []
        for pos in fam.members:
            r = records[pos]
            t = r.tensor or {}
            w.writerow([fam.family_id, r.run_id, r.id, r.generation, int(pos == fam.representative),
                        _fmt(r.cv), _fmt(t.get("E")), _fmt(t.get("nu"))])
            if r.feasible and r.tensor:
                es.append(t["E"])
                nus.append(t["nu"])
        stats = [float(np.mean(es)), float(np.max(es)), float(np.mean(nus)), float(np.min(nus)),
                 float(np.max(nus))] if es else [None] * 5
        rep = records[fam.representative]
        s.writerow([fam.family_id, rep.run_id, rep.id, len(fam.members), len(es), *map(_fmt, stats)])
    return mem.getvalue(), summ.getvalue()


def write_family_bundle(records: Sequence[ArchiveRecord], families: Sequence[Family], path) -> None:
    """Gzipped JSON: genomes grouped per family (member ids are positions in ``records``)."""
    data = {
        "format": "cppn-families",
        "version": 1,
        "families": [
            {
                "family": fam.family_id,
                "representative": {"run_id": records[fam.representative].run_id,
                                   "id": records[fam.representative].id},
                "members": [
                    {"run_id": records[p].run_id, "id": records[p].id, "genome": records[p].genome}
                    for p in fam.members
                ],
            }
            for fam in families
        ],
    }
    write_gzip_json(data, path)


def write_gzip_json(data, path) -> None:
    """Gzip with a zero timestamp so equal data gives equal bytes."""
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
        gz.write(json.dumps(data, separators=(",", ":")).encode("utf-8"))
