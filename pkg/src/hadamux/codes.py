"""Cyclic Hadamard-S coding matrices: construction, validation, closed-form inverse."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SMatrix",
    "CheckResult",
    "ValidationReport",
    "build_s_matrix",
    "s_inverse",
    "validate_s_matrix",
    "is_supported_order",
]

INVERSE_RESIDUAL_LIMIT = 1e-10


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for d in range(2, int(n**0.5) + 1):
        if n % d == 0:
            return False
    return True


def is_supported_order(order) -> bool:
    """True when a cyclic S-matrix of this order can be constructed (prime, = 3 mod 4)."""
    try:
        n = int(order)
    except (TypeError, ValueError):
        return False
    return n == order and n >= 3 and n % 4 == 3 and _is_prime(n)


@dataclass(frozen=True)
class SMatrix:
    """Binary cyclic coding matrix of order n with the S-matrix correlation property.

    Every row and column carries (n+1)/2 ones and S'S = ((n+1)/4)(I + J),
    which gives the exact closed-form inverse (2/(n+1))(2S' - J).
    Instances are immutable and safe to share across tasks.
    """

    order: int
    entries: np.ndarray  # (n, n) array of 0/1 integers
    convention: str = "unspecified"

    def __post_init__(self):
        self.entries.setflags(write=False)

    def as_float(self) -> np.ndarray:
        return self.entries.astype(float)


def build_s_matrix(order: int) -> SMatrix:
    """Construct the cyclic S-matrix of a given order.

    Uses the quadratic-residue rule on the first row (1 at column j iff j is a
    quadratic non-residue mod n, 0 at column 0), complemented whenever that
    leaves row weight (n-1)/2 instead of the required (n+1)/2; each subsequent
    row is the previous row cyclically shifted left by one. Supported orders
    are primes congruent to 3 mod 4, which covers 3, 7, 11, ..., 127, 131.

    Raises ValueError for any other order.
    """
    if isinstance(order, bool) or int(order) != order:
        raise ValueError(f"unsupported order {order!r}: must be an integer")
    n = int(order)
    if n < 3:
        raise ValueError(f"unsupported order {n}: must be at least 3")
    if not _is_prime(n):
        raise ValueError(f"unsupported order {n}: not prime")
    if n % 4 != 3:
        raise ValueError(f"unsupported order {n}: not congruent to 3 mod 4")

    residue = np.zeros(n, dtype=bool)
    for i in range(1, n):
        residue[(i * i) % n] = True
    row = np.ones(n, dtype=np.int64)
    row[0] = 0
    row[residue] = 0  # 1 iff non-residue
    convention = "first row: 1 at quadratic non-residues mod n"
    if row.sum() == (n - 1) // 2:
        row = 1 - row
        convention = "first row: complement of the non-residue rule (1 at 0 and at quadratic residues mod n)"

    entries = np.empty((n, n), dtype=np.int64)
    shifted = row
    for i in range(n):
        entries[i] = shifted
        shifted = np.roll(shifted, -1)
    return SMatrix(order=n, entries=entries, convention=convention)


def s_inverse(S: SMatrix) -> np.ndarray:
    """Closed-form inverse (2/(n+1))(2S' - J) of an S-matrix.

    The product with S equals the identity to within 1e-10 per entry for
    every supported order.
    """
    n = S.order
    return (2.0 / (n + 1)) * (2.0 * S.entries.T.astype(float) - 1.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    offenders: list = field(default_factory=list)


@dataclass
class ValidationReport:
    """Pass/fail record for each S-matrix invariant of a candidate matrix."""

    order: int
    checks: list[CheckResult]
    convention: str | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [f"order {self.order}"]
        if self.convention:
            out.append(f"convention: {self.convention}")
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            line = f"  [{status}] {c.name}"
            if c.detail:
                line += f": {c.detail}"
            if c.offenders:
                line += f" (offenders: {c.offenders[:10]})"
            out.append(line)
        return out


def validate_s_matrix(M) -> ValidationReport:
    """Check every S-matrix invariant of a square matrix and report per-check results.

    Checks binarity, row and column weights, the correlation property
    S'S = ((n+1)/4)(I+J) in exact integer arithmetic, and the closed-form
    inverse residual. Failures are report entries carrying offending indices,
    never exceptions.
    """
    convention = None
    if isinstance(M, SMatrix):
        convention = M.convention
        M = M.entries
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    n = A.shape[0]
    checks: list[CheckResult] = []

    binary = np.isin(A, (0, 1)) if A.dtype.kind in "iub" else np.isin(A, (0.0, 1.0))
    offenders = [tuple(ix) for ix in np.argwhere(~binary)]
    checks.append(
        CheckResult(
            "binarity (entries in {0, 1})",
            not offenders,
            "" if not offenders else f"{len(offenders)} non-binary entries",
            offenders,
        )
    )
    if not binary.all():
        # remaining checks are defined on binary matrices; report them as failed
        checks.append(CheckResult("row weights", False, "skipped: matrix not binary"))
        checks.append(CheckResult("column weights", False, "skipped: matrix not binary"))
        checks.append(CheckResult("correlation property", False, "skipped: matrix not binary"))
        checks.append(CheckResult("inverse residual", False, "skipped: matrix not binary"))
        return ValidationReport(order=n, checks=checks, convention=convention)

    B = np.rint(A).astype(np.int64)
    want = (n + 1) // 2
    row_w = B.sum(axis=1)
    col_w = B.sum(axis=0)
    bad_rows = np.flatnonzero(row_w != want) if n % 2 == 1 else np.arange(n)
    bad_cols = np.flatnonzero(col_w != want) if n % 2 == 1 else np.arange(n)
    weight_note = f"expected {(n + 1) / 2:g} ones"
    checks.append(
        CheckResult(
            "row weights",
            bad_rows.size == 0,
            weight_note if bad_rows.size else "",
            [(int(i), int(row_w[i])) for i in bad_rows],
        )
    )
    checks.append(
        CheckResult(
            "column weights",
            bad_cols.size == 0,
            weight_note if bad_cols.size else "",
            [(int(j), int(col_w[j])) for j in bad_cols],
        )
    )

    # exact integer comparison: 4 S'S == (n+1)(I + J)
    gram4 = 4 * (B.T @ B)
    target = (n + 1) * (np.eye(n, dtype=np.int64) + np.ones((n, n), dtype=np.int64))
    bad = [tuple(ix) for ix in np.argwhere(gram4 != target)]
    checks.append(
        CheckResult(
            "correlation property (S'S = ((n+1)/4)(I+J))",
            not bad,
            "" if not bad else f"{len(bad)} mismatched entries of S'S",
            bad,
        )
    )

    inv = (2.0 / (n + 1)) * (2.0 * B.T.astype(float) - 1.0)
    residual = float(np.abs(B.astype(float) @ inv - np.eye(n)).max())
    checks.append(
        CheckResult(
            "inverse residual",
            residual < INVERSE_RESIDUAL_LIMIT,
            f"max|S S^-1 - I| = {residual:.3e} (limit {INVERSE_RESIDUAL_LIMIT:g})",
        )
    )
    return ValidationReport(order=n, checks=checks, convention=convention)
