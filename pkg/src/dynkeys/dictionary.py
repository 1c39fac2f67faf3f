"""Pole-based dynamics dictionaries.

Every atom is the sampled impulse response ``p**k`` (``k = 0 .. T-1``) of a
one-pole linear time-invariant system.  Poles are stored as (magnitude,
phase) pairs with phase in ``[0, pi]``; a complex pole stands for itself and
its conjugate, and contributes two real columns (the real and imaginary parts
of its powers).  A real pole (phase 0 or pi) contributes a single column.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PoleSet",
    "DynDictionary",
    "build_dictionary",
    "init_pole_ring",
    "extend_rows",
    "truncate_rows",
    "save_dictionary",
    "load_dictionary",
    "dictionary_to_dict",
    "dictionary_from_dict",
]

REAL = "real"
COMPLEX = "complex"


class DuplicatePoleError(ValueError):
    pass


def _is_real_phase(phase):
    return phase == 0.0 or phase == np.pi


@dataclass(frozen=True)
class PoleSet:
    """Poles of a dynamics dictionary.

    Parameters
    ----------
    magnitudes, phases : array_like
        Polar coordinates of the stored poles.  Phases live in ``[0, pi]``;
        conjugate partners are implicit.
    kinds : sequence of {"real", "complex"}, optional
        Inferred from the phase when omitted (0 and pi are real).  A pole
        declared complex keeps two columns even if its phase is 0.
    include_constant_atom : bool
        Prepend the real pole at exactly 1 (a constant column).
    """

    magnitudes: np.ndarray
    phases: np.ndarray
    kinds: tuple = None
    include_constant_atom: bool = True

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=float).reshape(-1)
        phases = np.asarray(self.phases, dtype=float).reshape(-1)
        if mags.shape != phases.shape:
            raise ValueError("magnitudes and phases must have the same length")
        if np.any(~np.isfinite(mags)) or np.any(~np.isfinite(phases)):
            raise ValueError("poles must be finite")
        if np.any(mags <= 0):
            raise ValueError("pole magnitudes must be positive")
        if np.any(phases < 0) or np.any(phases > np.pi):
            raise ValueError("pole phases must lie in [0, pi]")
        if self.kinds is None:
            kinds = tuple(REAL if _is_real_phase(p) else COMPLEX for p in phases)
        else:
            kinds = tuple(self.kinds)
            if len(kinds) != len(mags):
                raise ValueError("kinds must match the number of poles")
            for k, p in zip(kinds, phases):
                if k not in (REAL, COMPLEX):
                    raise ValueError(f"unknown pole kind {k!r}")
                if k == REAL and not _is_real_phase(p):
                    raise ValueError("a real pole needs phase 0 or pi")
        mags.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "kinds", kinds)
        self._check_distinct()

    def _check_distinct(self):
        seen = {}
        if self.include_constant_atom:
            seen[(1.0, 0.0)] = "constant atom"
        for i, (m, p) in enumerate(zip(self.magnitudes, self.phases)):
            key = (float(m), float(p))
            if key in seen:
                raise DuplicatePoleError(
                    f"pole {i} (magnitude={m!r}, phase={p!r}) duplicates {seen[key]}"
                )
            seen[key] = f"pole {i}"

    def __len__(self):
        return len(self.magnitudes)

    def __eq__(self, other):
        if not isinstance(other, PoleSet):
            return NotImplemented
        return (
            self.include_constant_atom == other.include_constant_atom
            and self.kinds == other.kinds
            and np.array_equal(self.magnitudes, other.magnitudes)
            and np.array_equal(self.phases, other.phases)
        )

    __hash__ = None

    @property
    def num_columns(self):
        n = sum(1 if k == REAL else 2 for k in self.kinds)
        return n + int(self.include_constant_atom)

    def complex_poles(self):
        """Stored poles as complex numbers (constant atom excluded)."""
        return self.magnitudes * np.exp(1j * self.phases)

    def column_owner(self):
        """Pole index owning each column (-1 for the constant atom)."""
        owner = [-1] if self.include_constant_atom else []
        for i, k in enumerate(self.kinds):
            owner.extend([i] if k == REAL else [i, i])
        return np.array(owner, dtype=int)

    def replace(self, magnitudes=None, phases=None):
        return PoleSet(
            self.magnitudes if magnitudes is None else magnitudes,
            self.phases if phases is None else phases,
            kinds=self.kinds,
            include_constant_atom=self.include_constant_atom,
        )


def _atoms(poles, num_rows):
    k = np.arange(num_rows, dtype=float)[:, None]
    mags = poles.magnitudes[None, :]
    phases = poles.phases[None, :]
    radial = mags ** k
    re = radial * np.cos(k * phases)
    im = radial * np.sin(k * phases)
    cols = []
    if poles.include_constant_atom:
        cols.append(np.ones((num_rows, 1)))
    for i, kind in enumerate(poles.kinds):
        cols.append(re[:, i : i + 1])
        if kind == COMPLEX:
            cols.append(im[:, i : i + 1])
    return np.hstack(cols) if cols else np.zeros((num_rows, 0))


@dataclass(frozen=True)
class DynDictionary:
    """A ``T x N`` real atom matrix with its cached ``T x T`` Gram matrix.

    Build instances with :func:`build_dictionary`.  ``column_scale`` holds the
    per-column factors applied to the raw atoms (all ones unless the
    dictionary was built with ``normalize=True``); they are kept fixed when
    rows are added so that the prefix property survives normalization.
    """

    source: PoleSet
    num_rows: int
    normalize: bool = False
    column_scale: np.ndarray = None
    matrix: np.ndarray = field(init=False, repr=False)
    gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        raw = _atoms(self.source, self.num_rows)
        scale = self.column_scale
        if scale is None:
            if self.normalize:
                norms = np.linalg.norm(raw, axis=0)
                scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
            else:
                scale = np.ones(raw.shape[1])
        scale = np.asarray(scale, dtype=float)
        matrix = raw * scale
        gram = matrix @ matrix.T
        gram = 0.5 * (gram + gram.T)
        for a in (scale, matrix, gram):
            a.setflags(write=False)
        object.__setattr__(self, "column_scale", scale)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "gram", gram)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def num_atoms(self):
        return self.matrix.shape[1]

    def rows(self, indices):
        return self.matrix[np.asarray(indices, dtype=int)]


def build_dictionary(poles, num_rows, normalize=False):
    """Build the ``num_rows x N`` dictionary of ``poles``.

    Raises ``ValueError`` when ``num_rows < 2`` or the pole set is empty.
    Duplicate poles are rejected when the :class:`PoleSet` is created.
    """
    num_rows = int(num_rows)
    if num_rows < 2:
        raise ValueError(f"a dictionary needs at least 2 rows, got {num_rows}")
    if poles.num_columns == 0:
        raise ValueError("cannot build a dictionary from an empty pole set")
    return DynDictionary(poles, num_rows, normalize=normalize)


def init_pole_ring(count, ring=(0.85, 1.15), seed=0, include_constant_atom=True):
    """Sample ``count`` complex poles uniformly in an annulus sector.

    Magnitudes are uniform in ``ring``; phases are uniform in ``(0, pi)``.
    ``count`` does not include the optional constant atom.
    """
    count = int(count)
    rho_min, rho_max = map(float, ring)
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0 < rho_min <= rho_max:
        raise ValueError("ring must satisfy 0 < rho_min <= rho_max")
    rng = np.random.default_rng(seed)
    mags = rng.uniform(rho_min, rho_max, size=count)
    phases = rng.uniform(0.0, np.pi, size=count)
    # uniform() may return the lower bound; keep phases strictly inside (0, pi)
    phases = np.clip(phases, np.finfo(float).tiny, np.nextafter(np.pi, 0.0))
    return PoleSet(
        mags,
        phases,
        kinds=(COMPLEX,) * count,
        include_constant_atom=include_constant_atom,
    )


def extend_rows(dictionary, extra):
    """Return the same dictionary with ``extra`` more time steps."""
    extra = int(extra)
    if extra < 1:
        raise ValueError("extra must be >= 1")
    return DynDictionary(
        dictionary.source,
        dictionary.num_rows + extra,
        normalize=dictionary.normalize,
        column_scale=dictionary.column_scale,
    )


def truncate_rows(dictionary, num_rows):
    if not 2 <= num_rows <= dictionary.num_rows:
        raise ValueError("num_rows must be in [2, dictionary.num_rows]")
    return DynDictionary(
        dictionary.source,
        int(num_rows),
        normalize=dictionary.normalize,
        column_scale=dictionary.column_scale,
    )


def dictionary_to_dict(dictionary):
    poles = dictionary.source
    entries = []
    if poles.include_constant_atom:
        entries.append({"mag": 1.0, "phase": 0.0, "kind": "constant"})
    for m, p, k in zip(poles.magnitudes, poles.phases, poles.kinds):
        entries.append({"mag": float(m), "phase": float(p), "kind": k})
    return {
        "num_rows": int(dictionary.num_rows),
        "poles": entries,
        "normalize_flag": bool(dictionary.normalize),
    }


def dictionary_from_dict(doc):
    entries = doc["poles"]
    const = any(e.get("kind") == "constant" for e in entries)
    rest = [e for e in entries if e.get("kind") != "constant"]
    poles = PoleSet(
        [e["mag"] for e in rest],
        [e["phase"] for e in rest],
        kinds=tuple(e.get("kind") or (REAL if _is_real_phase(e["phase"]) else COMPLEX) for e in rest),
        include_constant_atom=const,
    )
    return build_dictionary(poles, doc["num_rows"], normalize=bool(doc.get("normalize_flag", False)))


def save_dictionary(dictionary, path):
    Path(path).write_text(json.dumps(dictionary_to_dict(dictionary), indent=2))


def load_dictionary(path):
    return dictionary_from_dict(json.loads(Path(path).read_text()))
