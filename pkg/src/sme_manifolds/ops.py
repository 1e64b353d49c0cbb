"""
Operator Algebra Module
Dense operator constructions, density-operator checks and fixed Hermitian bases.
"""

import logging
from functools import lru_cache, reduce
from itertools import product
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, special

from .exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

PAULI: Dict[str, np.ndarray] = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}

PAULI_LABELS = ('I', 'X', 'Y', 'Z')

# Hermiticity / trace tolerances of a valid density operator
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
NEGATIVITY_TOL = 1e-10


def dag(op: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return op.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the given operators, left to right."""
    if not ops:
        raise InvalidArgumentError("tensor() needs at least one operator")
    return reduce(np.kron, ops)


def embed(op: np.ndarray, index: int, dims: Sequence[int]) -> np.ndarray:
    """
    Place a single-factor operator on factor ``index`` of a tensor product.

    Args:
        op: Operator acting on factor ``index``
        index: Zero-based factor position
        dims: Dimensions of all factors

    Returns:
        Operator on the full space
    """
    if not 0 <= index < len(dims):
        raise InvalidArgumentError(f"Factor index {index} out of range for dims {list(dims)}")
    if op.shape != (dims[index], dims[index]):
        raise InvalidArgumentError(
            f"Operator shape {op.shape} does not match factor dimension {dims[index]}"
        )
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[index] = np.asarray(op, dtype=complex)
    return tensor(*factors)


def check_operator(op: np.ndarray, name: str = "operator") -> np.ndarray:
    """Return ``op`` as a finite square complex matrix or raise InvalidArgumentError."""
    arr = np.asarray(op, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidArgumentError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


def check_same_dim(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    if a.shape != b.shape:
        raise InvalidArgumentError(f"Dimension mismatch between {what}: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- bosonic mode

def annihilation(n_max: int) -> np.ndarray:
    """
    Truncated annihilation operator on levels 0..n_max.

    Args:
        n_max: Highest Fock level kept (matrix size is n_max + 1)

    Returns:
        (n_max+1)x(n_max+1) matrix with entry (n, n+1) = sqrt(n+1)

    Raises:
        InvalidArgumentError: If n_max is negative
    """
    if n_max < 0:
        raise InvalidArgumentError(f"n_max must be non-negative, got {n_max}")
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def creation(n_max: int) -> np.ndarray:
    return dag(annihilation(n_max))


def number_op(n_max: int) -> np.ndarray:
    if n_max < 0:
        raise InvalidArgumentError(f"n_max must be non-negative, got {n_max}")
    return np.diag(np.arange(n_max + 1, dtype=float)).astype(complex)


def quadratures(n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """Quadratures X = (a + a^dag)/2 and P = (a - a^dag)/(2i)."""
    a = annihilation(n_max)
    return (a + dag(a)) / 2, (a - dag(a)) / 2j


def parity(n_max: int) -> np.ndarray:
    """Photon-number parity (-1)^N."""
    return np.diag((-1.0) ** np.arange(n_max + 1)).astype(complex)


def displacement(alpha: complex, n_max: int) -> np.ndarray:
    a = annihilation(n_max)
    return linalg.expm(alpha * dag(a) - np.conj(alpha) * a)


def fock_ket(n: int, n_max: int) -> np.ndarray:
    if not 0 <= n <= n_max:
        raise InvalidArgumentError(f"Fock level {n} outside 0..{n_max}")
    ket = np.zeros(n_max + 1, dtype=complex)
    ket[n] = 1.0
    return ket


def coherent_ket(alpha: complex, n_max: int) -> np.ndarray:
    """Coherent-state amplitudes from the Poisson series, renormalized on the truncation."""
    n = np.arange(n_max + 1)
    log_norm = -0.5 * abs(alpha) ** 2 - 0.5 * special.gammaln(n + 1)
    if alpha == 0:
        ket = np.zeros(n_max + 1, dtype=complex)
        ket[0] = 1.0
        return ket
    ket = np.exp(log_norm + n * np.log(complex(alpha)))
    return ket / np.linalg.norm(ket)


def cat_ket(alpha: complex, n_max: int, sign: int = 1) -> np.ndarray:
    """Cat state proportional to |alpha> + sign |-alpha>."""
    ket = coherent_ket(alpha, n_max) + sign * coherent_ket(-alpha, n_max)
    norm = np.linalg.norm(ket)
    if norm < 1e-14:
        raise InvalidArgumentError(f"Cat state with alpha={alpha}, sign={sign} vanishes")
    return ket / norm


def thermal_density(n_bar: float, n_max: int) -> np.ndarray:
    if n_bar < 0:
        raise InvalidArgumentError(f"Thermal occupation must be >= 0, got {n_bar}")
    if n_bar == 0:
        return projector(fock_ket(0, n_max))
    n = np.arange(n_max + 1)
    weights = (n_bar / (1 + n_bar)) ** n
    return np.diag(weights / weights.sum()).astype(complex)


def tail_population(rho: np.ndarray, levels: int = 2, dims: Optional[Sequence[int]] = None,
                    factor: int = -1) -> float:
    """
    Population carried by the top ``levels`` Fock levels of one factor.

    Used to check that a truncation is adequate for an oscillator factor.
    """
    rho = np.asarray(rho)
    if dims is None:
        dims = [rho.shape[0]]
    dims = list(dims)
    factor = factor % len(dims)
    n = dims[factor]
    diag = np.real(np.diag(rho)).reshape(dims)
    moved = np.moveaxis(diag, factor, -1).reshape(-1, n)
    return float(moved[:, n - levels:].sum())


# ---------------------------------------------------------------- qubits

def pauli_string(spec: Union[str, Mapping[int, str]], n_qubits: Optional[int] = None) -> np.ndarray:
    """
    Tensor product of Pauli matrices.

    Args:
        spec: Either a full label string such as "IZZ", or a mapping
            {qubit: label} with 1-based qubit numbers (requires n_qubits)
        n_qubits: Total qubit count when ``spec`` is a mapping

    Returns:
        2^n x 2^n operator

    Raises:
        InvalidArgumentError: If the spec is empty or contains an unknown label
    """
    if isinstance(spec, Mapping):
        if n_qubits is None:
            raise InvalidArgumentError("n_qubits is required when spec is a mapping")
        labels = ['I'] * n_qubits
        for qubit, label in spec.items():
            if not 1 <= qubit <= n_qubits:
                raise InvalidArgumentError(f"Qubit {qubit} outside 1..{n_qubits}")
            labels[qubit - 1] = label
        spec = ''.join(labels)

    if not spec:
        raise InvalidArgumentError("Pauli spec must be nonempty")
    unknown = [c for c in spec if c not in PAULI]
    if unknown:
        raise InvalidArgumentError(f"Unknown Pauli label(s) {unknown} in '{spec}'")
    return tensor(*(PAULI[c] for c in spec))


def sigma_minus() -> np.ndarray:
    """Qubit lowering operator |0><1| (|0> is the ground state)."""
    return np.array([[0, 1], [0, 0]], dtype=complex)


def two_qubit_labels() -> Tuple[str, ...]:
    return tuple(a + b for a, b in product(PAULI_LABELS, repeat=2))


def pauli_coords(rho: np.ndarray) -> Dict[str, float]:
    """
    Two-qubit Pauli coordinates r(jk) = Tr(rho sigma_j (x) sigma_k).

    Raises:
        InvalidArgumentError: If rho is not 4x4
    """
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise InvalidArgumentError(f"pauli_coords needs a 4x4 operator, got {rho.shape}")
    return {label: float(np.real(np.trace(pauli_string(label) @ rho)))
            for label in two_qubit_labels()}


def from_pauli_coords(coords: Mapping[str, float]) -> np.ndarray:
    """Inverse of pauli_coords: rho = sum r(jk) sigma_j (x) sigma_k / 4."""
    rho = np.zeros((4, 4), dtype=complex)
    for label, value in coords.items():
        rho += value * pauli_string(label)
    return rho / 4


# ---------------------------------------------------------------- states

def projector(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    return np.outer(ket, ket.conj())


def normalize_ket(amplitudes: Iterable[complex]) -> np.ndarray:
    ket = np.asarray(list(amplitudes), dtype=complex)
    norm = np.linalg.norm(ket)
    if norm == 0:
        raise InvalidArgumentError("State amplitudes are all zero")
    return ket / norm


def hermitize(op: np.ndarray) -> np.ndarray:
    return (op + dag(op)) / 2


def expectation(rho: np.ndarray, op: np.ndarray) -> complex:
    """
    Tr(op rho).

    Raises:
        InvalidArgumentError: On dimension mismatch
    """
    check_same_dim(np.asarray(rho), np.asarray(op), "state and observable")
    # Tr(A rho) without forming the product
    return complex(np.sum(np.asarray(op).T * np.asarray(rho)))


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.sum(rho * rho.T)))


def validate_density(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    """
    Check the density-operator invariants (Hermitian, unit trace, PSD up to tolerance).

    Returns:
        The operator as a complex array

    Raises:
        InvalidArgumentError: If any invariant fails
    """
    arr = check_operator(rho, name)
    herm_err = np.max(np.abs(arr - dag(arr)))
    if herm_err > HERMITIAN_TOL:
        raise InvalidArgumentError(f"{name} is not Hermitian (max deviation {herm_err:.3g})")
    trace_err = abs(np.trace(arr) - 1)
    if trace_err > TRACE_TOL:
        raise InvalidArgumentError(f"{name} does not have unit trace (error {trace_err:.3g})")
    min_eig = np.linalg.eigvalsh(hermitize(arr))[0]
    if min_eig < -NEGATIVITY_TOL:
        raise InvalidArgumentError(f"{name} has negative eigenvalue {min_eig:.3g}")
    return arr


def random_density(dim: int, rng: np.random.Generator, min_eig: float = 0.02,
                   support: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Random full-rank density operator obtained by normalizing G G^dag + eps I.

    Args:
        dim: Hilbert-space dimension
        rng: Random generator
        min_eig: Lower bound enforced on every eigenvalue (on the support)
        support: Optional basis indices the state is restricted to (the
            state is zero outside them, e.g. to keep Fock tails empty)

    Returns:
        Density operator
    """
    indices = list(range(dim)) if support is None else list(support)
    k = len(indices)
    if k == 0:
        raise InvalidArgumentError("Empty support for random state")
    if min_eig * k >= 1:
        raise InvalidArgumentError(f"min_eig={min_eig} infeasible on a support of size {k}")

    g = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    sub = g @ dag(g) + 1e-3 * np.eye(k)
    sub /= np.trace(sub).real
    # Mix towards identity just enough to lift the smallest eigenvalue
    low = np.linalg.eigvalsh(sub)[0]
    if low < min_eig:
        p = (min_eig - low) / (1.0 / k - low)
        sub = (1 - p) * sub + p * np.eye(k) / k

    rho = np.zeros((dim, dim), dtype=complex)
    rho[np.ix_(indices, indices)] = sub
    return hermitize(rho)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


# ---------------------------------------------------------------- Hermitian basis

@lru_cache(maxsize=32)
def _gell_mann(dim: int) -> np.ndarray:
    basis = []
    for j in range(dim):
        for k in range(j + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[j, k] = m[k, j] = 1 / np.sqrt(2)
            basis.append(m)
    for j in range(dim):
        for k in range(j + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[j, k] = -1j / np.sqrt(2)
            m[k, j] = 1j / np.sqrt(2)
            basis.append(m)
    for level in range(1, dim):
        m = np.zeros((dim, dim), dtype=complex)
        m[np.arange(level), np.arange(level)] = 1.0
        m[level, level] = -level
        basis.append(m / np.sqrt(level * (level + 1)))
    stacked = np.array(basis) if basis else np.zeros((0, dim, dim), dtype=complex)
    stacked.setflags(write=False)
    return stacked


def hermitian_basis(dim: int) -> np.ndarray:
    """
    Orthonormal basis of traceless Hermitian dim x dim matrices.

    Generalized Gell-Mann ordering: symmetric, antisymmetric, then diagonal
    elements; Tr(B_i B_j) = delta_ij.
    """
    if dim < 1:
        raise InvalidArgumentError(f"dim must be positive, got {dim}")
    return _gell_mann(dim)


def to_vec(op: np.ndarray) -> np.ndarray:
    """Real coordinates of a traceless Hermitian operator in the Gell-Mann basis."""
    op = np.asarray(op)
    basis = hermitian_basis(op.shape[0])
    return np.real(np.einsum('kij,ji->k', basis, op))


def from_vec(vec: np.ndarray, dim: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (dim * dim - 1,):
        raise InvalidArgumentError(f"Vector of length {vec.shape} does not match dim {dim}")
    return np.einsum('k,kij->ij', vec, hermitian_basis(dim))


class TangentVector:
    """A state-space direction: Hermitian traceless operator with its basis coordinates."""

    __slots__ = ('op', '_vec')

    def __init__(self, op: np.ndarray):
        self.op = np.asarray(op, dtype=complex)
        self._vec = None

    @property
    def vec(self) -> np.ndarray:
        if self._vec is None:
            self._vec = to_vec(self.op)
        return self._vec

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.op))

    def __repr__(self) -> str:
        return f"TangentVector(dim={self.dim}, norm={self.norm():.3g})"


# ---------------------------------------------------------------- phase space

def wigner_function(rho: np.ndarray, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    """
    Wigner function W(x,p) = (2/pi) Tr(Pi D(-alpha) rho D(alpha)), alpha = x + i p.

    Evaluated on the outer grid xs x ps (rows follow xs). Intended for
    moderate grids; each point costs one matrix exponential.
    """
    rho = np.asarray(rho)
    n_max = rho.shape[0] - 1
    par = np.diag(parity(n_max)).real
    out = np.empty((len(xs), len(ps)))
    for i, x in enumerate(xs):
        for j, p in enumerate(ps):
            d = displacement(-(x + 1j * p), n_max)
            shifted = d @ rho @ dag(d)
            out[i, j] = 2 / np.pi * float(np.real(np.sum(par * np.diag(shifted))))
    return out
