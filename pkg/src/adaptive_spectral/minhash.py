"""k-mer sets, seeded min-hash sketches and collision matrices for read overlap.

Hash family (part of the public contract, bit-exact on every platform):

* A k-mer (``k <= 32``) is packed big-endian, two bits per base
  (A=0, C=1, G=2, T=3), into an unsigned 64-bit integer ``x``. With
  ``canonical=True`` the smaller of ``x`` and the code of its reverse
  complement is used.
* ``mix64`` is the 64-bit finalizer::

      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      z =  z ^ (z >> 31)                        (all mod 2**64)

* Seed ``s`` hashes ``x`` to ``mix64(x ^ mix64(s + 0x9E3779B97F4A7C15))``.

A read's sketch stores, for each seed, the minimum hash over its k-mer set.
Two reads collide on a seed when their minima agree, which happens with
probability equal to the Jaccard similarity of their k-mer sets.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, List, Optional, Sequence, Union

import numpy as np

from ._seeding import rng_for

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX_C1 = np.uint64(0xBF58476D1CE4E5B9)
MIX_C2 = np.uint64(0x94D049BB133111EB)
DEFAULT_K = 14
MAGIC = b"MHSK"
FORMAT_VERSION = 1

_ALPHABET = "ACGT"
_CODE = np.full(256, 255, dtype=np.uint8)
for _i, _b in enumerate(_ALPHABET):
    _CODE[ord(_b)] = _i
    _CODE[ord(_b.lower())] = _i
_SEED_CHUNK = 64


class FastaError(ValueError):
    """Malformed FASTA input; ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: Optional[int] = None):
        where = "" if path is None else f"{path}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class SketchFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Read:
    id: str
    sequence: str
    is_calibration: bool = False

    def __post_init__(self):
        seq = self.sequence.upper()
        bad = set(seq) - set(_ALPHABET)
        if bad:
            raise ValueError(f"read {self.id!r} has characters outside ACGT: {sorted(bad)}")
        object.__setattr__(self, "sequence", seq)

    def __len__(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True, eq=False)
class ReadSketch:
    read_id: str
    minima: np.ndarray
    k: int
    seeds: np.ndarray
    canonical: bool = False

    def __eq__(self, other):
        if not isinstance(other, ReadSketch):
            return NotImplemented
        return (
            self.read_id == other.read_id
            and self.k == other.k
            and self.canonical == other.canonical
            and np.array_equal(self.seeds, other.seeds)
            and np.array_equal(self.minima, other.minima)
        )


@dataclass(frozen=True, eq=False)
class CollisionMatrix:
    """``Y[i, j] = 1`` iff read ``i`` and the reference share the minimum at seed ``j``."""

    Y: np.ndarray
    reference_id: str
    read_ids: List[str] = field(default_factory=list)

    @property
    def shape(self):
        return self.Y.shape

    def rows(self, ids: Iterable[str]) -> np.ndarray:
        index = {rid: i for i, rid in enumerate(self.read_ids)}
        try:
            return np.array([index[i] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"unknown read id {exc.args[0]!r}") from None


def _as_sequence(read: Union[Read, str]) -> str:
    return read.sequence if isinstance(read, Read) else str(read).upper()


def _check_k(k: int) -> None:
    if not 1 <= k <= 32:
        raise ValueError("k must lie in 1..32")


def kmer_set(sequence: str, k: int) -> set:
    """Distinct length-``k`` substrings of ``sequence``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(sequence) < k:
        raise ValueError(f"sequence of length {len(sequence)} is shorter than k={k}")
    return {sequence[i : i + k] for i in range(len(sequence) - k + 1)}


def jaccard_exact(s0: str, s1: str, k: int) -> float:
    a, b = kmer_set(s0, k), kmer_set(s1, k)
    return len(a & b) / len(a | b)


def _revcomp_codes(codes: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(codes)
    x = codes.copy()
    for _ in range(k):
        out = (out << np.uint64(2)) | (np.uint64(3) - (x & np.uint64(3)))
        x >>= np.uint64(2)
    return out


def kmer_codes(sequence: str, k: int, canonical: bool = False) -> np.ndarray:
    """Sorted distinct 2-bit packed codes of the k-mers of ``sequence``."""
    _check_k(k)
    if len(sequence) < k:
        raise ValueError(f"sequence of length {len(sequence)} is shorter than k={k}")
    raw = _CODE[np.frombuffer(sequence.encode("ascii"), dtype=np.uint8)]
    if np.any(raw == 255):
        raise ValueError("sequence has characters outside ACGT")
    base = raw.astype(np.uint64)
    n = base.size - k + 1
    codes = np.zeros(n, dtype=np.uint64)
    for j in range(k):
        codes = (codes << np.uint64(2)) | base[j : j + n]
    if canonical:
        codes = np.minimum(codes, _revcomp_codes(codes, k))
    return np.unique(codes)


def mix64(z) -> np.ndarray:
    """The documented 64-bit finalizer, applied elementwise."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * MIX_C1
        z = (z ^ (z >> np.uint64(27))) * MIX_C2
    return z ^ (z >> np.uint64(31))


def seed_keys(seeds) -> np.ndarray:
    s = np.asarray(seeds, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(s + GOLDEN)


def hash_kmers(codes, seed) -> np.ndarray:
    """``h_seed`` of every packed k-mer code."""
    return mix64(np.asarray(codes, dtype=np.uint64) ^ seed_keys(seed))


def draw_seeds(n: int, root_seed: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one seed")
    return rng_for(root_seed, 0x4D48).integers(0, 2**64, size=n, dtype=np.uint64, endpoint=False)


def _minima(code_lists: Sequence[np.ndarray], seeds: np.ndarray) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.uint64)
    if seeds.size == 0:
        raise ValueError("seeds must be nonempty")
    lengths = np.array([c.size for c in code_lists])
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    flat = np.concatenate(code_lists)
    out = np.empty((len(code_lists), seeds.size), dtype=np.uint64)
    keys = seed_keys(seeds)
    for lo in range(0, seeds.size, _SEED_CHUNK):
        hi = min(lo + _SEED_CHUNK, seeds.size)
        h = mix64(flat[None, :] ^ keys[lo:hi, None])
        out[:, lo:hi] = np.minimum.reduceat(h, starts, axis=1).T
    return out


def sketch(read: Union[Read, str], k: int, seeds, canonical: bool = False) -> ReadSketch:
    seq = _as_sequence(read)
    seeds = np.asarray(seeds, dtype=np.uint64)
    minima = _minima([kmer_codes(seq, k, canonical)], seeds)[0]
    rid = read.id if isinstance(read, Read) else ""
    return ReadSketch(rid, minima, k, seeds.copy(), canonical)


def sketch_many(reads: Sequence[Read], k: int, seeds, canonical: bool = False) -> List[ReadSketch]:
    """Sketches of many reads; one vectorized pass per block of seeds."""
    if not reads:
        return []
    seeds = np.asarray(seeds, dtype=np.uint64)
    codes = [kmer_codes(r.sequence, k, canonical) for r in reads]
    minima = _minima(codes, seeds)
    return [ReadSketch(r.id, minima[i], k, seeds, canonical) for i, r in enumerate(reads)]


def collision_matrix(
    reference: Read, reads: Sequence[Read], k: int, seeds, canonical: bool = False
) -> CollisionMatrix:
    if not reads:
        raise ValueError("need at least one read")
    seeds = np.asarray(seeds, dtype=np.uint64)
    codes = [kmer_codes(reference.sequence, k, canonical)]
    codes += [kmer_codes(r.sequence, k, canonical) for r in reads]
    minima = _minima(codes, seeds)
    Y = (minima[1:] == minima[0][None, :]).astype(np.uint8)
    return CollisionMatrix(Y, reference.id, [r.id for r in reads])


def collision_from_sketches(reference: ReadSketch, sketches: Sequence[ReadSketch]) -> CollisionMatrix:
    for s in sketches:
        if s.k != reference.k or s.canonical != reference.canonical or not np.array_equal(s.seeds, reference.seeds):
            raise ValueError(f"sketch {s.read_id!r} was built with different parameters")
    minima = np.vstack([s.minima for s in sketches])
    Y = (minima == reference.minima[None, :]).astype(np.uint8)
    return CollisionMatrix(Y, reference.read_id, [s.read_id for s in sketches])


def jaccard_estimate(y_row) -> float:
    y = np.asarray(y_row, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty collision row")
    return float(y.mean())


def calibrate_v_norm(Y: Union[CollisionMatrix, np.ndarray], calibration_ids) -> float:
    """``||v_hat||`` from calibration rows of ``X = 1 - Y``.

    Calibration reads share no k-mers with the reference, so their ``u`` is 1
    and each of their processed rows is an unbiased look at ``v``.
    """
    if isinstance(Y, CollisionMatrix):
        rows = Y.rows(calibration_ids)
        mat = Y.Y
    else:
        rows = np.asarray(list(calibration_ids), dtype=np.int64)
        mat = np.asarray(Y)
    if rows.size == 0:
        raise ValueError("need at least one calibration row")
    v_hat = (1.0 - mat[rows].astype(float)).mean(axis=0)
    return float(np.linalg.norm(v_hat))


def parse_fasta(path: Union[str, os.PathLike]) -> List[Read]:
    """Reads of a FASTA file; ids are the first token of each header."""
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        return parse_fasta_text(fh, path)


def parse_fasta_text(lines: Union[str, Iterable[str]], path=None) -> List[Read]:
    if isinstance(lines, str):
        lines = io.StringIO(lines)
    reads: List[Read] = []
    header_id: Optional[str] = None
    header_line = 0
    chunks: List[str] = []
    allowed = set("ACGTacgt")

    def flush():
        if header_id is None:
            return
        if not chunks:
            raise FastaError(f"record {header_id!r} has no sequence", path, header_line)
        reads.append(Read(header_id, "".join(chunks)))

    saw_any = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        saw_any = True
        if line.startswith(">"):
            flush()
            tokens = line[1:].split()
            if not tokens:
                raise FastaError("header without an id", path, lineno)
            header_id, header_line, chunks = tokens[0], lineno, []
            continue
        if header_id is None:
            raise FastaError("sequence data before the first header", path, lineno)
        bad = set(line) - allowed
        if bad:
            raise FastaError(f"invalid sequence characters {''.join(sorted(bad))!r}", path, lineno)
        chunks.append(line)
    if not saw_any:
        raise FastaError("empty FASTA input", path)
    flush()
    return reads


def write_fasta(reads: Iterable[Read], path_or_file, width: int = 80) -> None:
    def emit(fh):
        for r in reads:
            fh.write(f">{r.id}\n")
            for i in range(0, len(r.sequence), width):
                fh.write(r.sequence[i : i + width] + "\n")

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", encoding="ascii") as fh:
            emit(fh)


# Sketch file layout, little-endian:
#   b"MHSK", u8 version, u8 canonical, u16 k, u32 seed count S, S x u64 seeds,
#   u32 read count, then per read: u32 id length, utf-8 id, S x u64 minima
_HEAD = struct.Struct("<4sBBHI")


def write_sketches(sketches: Sequence[ReadSketch], fh: BinaryIO) -> None:
    if not sketches:
        raise ValueError("nothing to write")
    first = sketches[0]
    seeds = np.asarray(first.seeds, dtype="<u8")
    for s in sketches:
        if s.k != first.k or s.canonical != first.canonical or not np.array_equal(s.seeds, first.seeds):
            raise ValueError("all sketches in a file must share k, seeds and strand mode")
    fh.write(_HEAD.pack(MAGIC, FORMAT_VERSION, int(first.canonical), first.k, seeds.size))
    fh.write(seeds.tobytes())
    fh.write(struct.pack("<I", len(sketches)))
    for s in sketches:
        rid = s.read_id.encode("utf-8")
        fh.write(struct.pack("<I", len(rid)))
        fh.write(rid)
        fh.write(np.asarray(s.minima, dtype="<u8").tobytes())


def _take(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise SketchFormatError("truncated sketch file")
    return data


def read_sketches(fh: BinaryIO) -> List[ReadSketch]:
    magic, version, canonical, k, n_seeds = _HEAD.unpack(_take(fh, _HEAD.size))
    if magic != MAGIC:
        raise SketchFormatError("not a sketch file (bad magic)")
    if version != FORMAT_VERSION:
        raise SketchFormatError(f"unsupported sketch format version {version}")
    seeds = np.frombuffer(_take(fh, 8 * n_seeds), dtype="<u8").astype(np.uint64)
    (n_reads,) = struct.unpack("<I", _take(fh, 4))
    out = []
    for _ in range(n_reads):
        (id_len,) = struct.unpack("<I", _take(fh, 4))
        rid = _take(fh, id_len).decode("utf-8")
        minima = np.frombuffer(_take(fh, 8 * n_seeds), dtype="<u8").astype(np.uint64)
        out.append(ReadSketch(rid, minima, k, seeds, bool(canonical)))
    if fh.read(1):
        raise SketchFormatError("trailing bytes after the last sketch")
    return out
