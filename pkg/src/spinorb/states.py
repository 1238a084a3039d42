"""Value types and exact linear algebra for spin/OAM photon states.

Basis conventions used throughout the package:

* Spin space is two-dimensional with basis ``(sigma+, sigma-)`` (right/left
  circular), related to linear polarizations by ``|H> = (|s+> + |s->)/sqrt(2)``
  and ``|V> = (|s+> - |s->)/(sqrt(2)*i)``, i.e. ``|s+-> = (|H> +- i|V>)/sqrt(2)``.
* OAM space is the discrete ladder ``l = -L..+L`` for a truncation ``L >= 0``.
* Composite amplitudes are stored spin-major: index ``s*(2L+1) + (l+L)`` with
  ``s=0`` for sigma+ and ``s=1`` for sigma-.

All objects are immutable values; the functions here are pure.
"""

from __future__ import annotations

import json
import math

import numpy as np

NORM_TOL = 1e-12
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

#: spin basis labels in storage order: +1 = sigma+, -1 = sigma-
SPIN_LABELS = (+1, -1)

#: basis labels of the standard 4-dim spin (x) {l=-1,+1} tomography block
BLOCK_LABELS = ((+1, -1), (+1, +1), (-1, -1), (-1, +1))


def _normalized(amplitudes, tol=NORM_TOL):
    a = np.asarray(amplitudes, dtype=complex).ravel()
    norm = np.linalg.norm(a)
    if norm < tol:
        raise ValueError("cannot normalize a zero amplitude vector")
    a = a / norm
    a.flags.writeable = False
    return a


class SpinKet:
    """Normalized two-component spin state in the (sigma+, sigma-) basis."""

    def __init__(self, amplitudes):
        a = _normalized(amplitudes)
        if a.shape != (2,):
            raise ValueError(f"spin ket needs 2 amplitudes, got {a.shape}")
        self.amplitudes = a

    @classmethod
    def sigma_plus(cls):
        return cls([1.0, 0.0])

    @classmethod
    def sigma_minus(cls):
        return cls([0.0, 1.0])

    @classmethod
    def from_hv(cls, h, v):
        """Build from components in the (H, V) linear basis."""
        s = math.sqrt(0.5)
        return cls([s * (h - 1j * v), s * (h + 1j * v)])

    @classmethod
    def h(cls):
        return cls.from_hv(1.0, 0.0)

    @classmethod
    def v(cls):
        return cls.from_hv(0.0, 1.0)

    @property
    def hv(self):
        """Components in the (H, V) basis."""
        s = math.sqrt(0.5)
        ap, am = self.amplitudes
        return np.array([s * (ap + am), s * (1j * ap - 1j * am)])

    def overlap(self, other: "SpinKet") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"SpinKet({self.amplitudes.tolist()})"


class OamKet:
    """Normalized OAM state on the truncated ladder l = -L..+L."""

    def __init__(self, amplitudes, truncation: int):
        if truncation < 0:
            raise ValueError("truncation must be non-negative")
        a = _normalized(amplitudes)
        if a.shape != (2 * truncation + 1,):
            raise ValueError(
                f"expected {2 * truncation + 1} amplitudes for L={truncation}, got {a.shape[0]}"
            )
        self.truncation = truncation
        self.amplitudes = a

    @classmethod
    def basis(cls, ell: int, truncation: int = 1):
        if abs(ell) > truncation:
            raise ValueError(f"l={ell} outside truncation L={truncation}")
        a = np.zeros(2 * truncation + 1)
        a[ell + truncation] = 1.0
        return cls(a, truncation)

    def amplitude(self, ell: int) -> complex:
        if abs(ell) > self.truncation:
            return 0.0 + 0.0j
        return complex(self.amplitudes[ell + self.truncation])

    def overlap(self, other: "OamKet") -> complex:
        ells = range(-max(self.truncation, other.truncation), max(self.truncation, other.truncation) + 1)
        return complex(sum(np.conj(self.amplitude(l)) * other.amplitude(l) for l in ells))

    def __repr__(self):
        return f"OamKet(L={self.truncation}, {self.amplitudes.tolist()})"


class PureState:
    """Normalized state on the spin (x) OAM product space, spin-major storage."""

    def __init__(self, amplitudes, truncation: int):
        if truncation < 0:
            raise ValueError("truncation must be non-negative")
        a = _normalized(amplitudes)
        dim = 2 * (2 * truncation + 1)
        if a.shape != (dim,):
            raise ValueError(f"expected {dim} amplitudes for L={truncation}, got {a.shape[0]}")
        self.truncation = truncation
        self.amplitudes = a

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def index(self, spin: int, ell: int) -> int:
        """Flat index of basis state (spin, l); spin is +1 or -1."""
        if spin not in SPIN_LABELS:
            raise ValueError("spin must be +1 or -1")
        if abs(ell) > self.truncation:
            raise ValueError(f"l={ell} outside truncation L={self.truncation}")
        s = 0 if spin == +1 else 1
        return s * (2 * self.truncation + 1) + (ell + self.truncation)

    def amplitude(self, spin: int, ell: int) -> complex:
        return complex(self.amplitudes[self.index(spin, ell)])

    def basis_labels(self):
        n = 2 * self.truncation + 1
        return tuple((s, l - self.truncation) for s in SPIN_LABELS for l in range(n))

    def overlap(self, other: "PureState") -> complex:
        if self.truncation != other.truncation:
            raise ValueError("truncation mismatch")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def equal_up_to_phase(self, other: "PureState", tol: float = 1e-12) -> bool:
        return abs(abs(self.overlap(other)) - 1.0) < tol

    def __repr__(self):
        return f"PureState(L={self.truncation}, {np.round(self.amplitudes, 6).tolist()})"


class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite operator with labeled basis.

    ``basis_labels`` is a tuple of ``(spin, l)`` pairs, one per matrix row,
    with spin in {+1, -1}. Hermiticity and trace are validated at
    construction; eigenvalue negativity below ``-PSD_TOL`` is rejected,
    smaller negativity is tolerated and clamped on demand.
    """

    def __init__(self, entries, basis_labels, validate: bool = True):
        m = np.array(entries, dtype=complex)
        labels = tuple((int(s), int(l)) for s, l in basis_labels)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if len(labels) != m.shape[0]:
            raise ValueError("basis_labels length must match dimension")
        if validate:
            if np.abs(m - m.conj().T).max() >= HERMITICITY_TOL:
                raise ValueError("matrix is not Hermitian within tolerance")
            if abs(np.trace(m).real - 1.0) >= TRACE_TOL or abs(np.trace(m).imag) >= TRACE_TOL:
                raise ValueError(f"trace must be 1, got {np.trace(m)}")
            lo = np.linalg.eigvalsh(m)[0]
            if lo < -PSD_TOL:
                raise ValueError(f"matrix not PSD: min eigenvalue {lo}")
        m.flags.writeable = False
        self.entries = m
        self.basis_labels = labels

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def clamped(self) -> "DensityMatrix":
        """Project onto the PSD cone (eigenvalues clipped at 0) and renormalize."""
        w, v = np.linalg.eigh(self.entries)
        w = np.clip(w, 0.0, None)
        m = (v * w) @ v.conj().T
        m = 0.5 * (m + m.conj().T)
        return DensityMatrix(m / np.trace(m).real, self.basis_labels)

    def to_json(self) -> str:
        """Serialize to JSON; floats round-trip exactly (repr carries 17 digits)."""
        payload = {
            "dim": self.dim,
            "basis_labels": [list(p) for p in self.basis_labels],
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        payload = json.loads(text)
        m = np.array(payload["re"]) + 1j * np.array(payload["im"])
        if m.shape != (payload["dim"], payload["dim"]):
            raise ValueError("matrix shape does not match declared dim")
        return cls(m, [tuple(p) for p in payload["basis_labels"]])

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def tensor(spin: SpinKet, oam: OamKet) -> PureState:
    """Product state with amplitudes a(s, l) = spin(s) * oam(l)."""
    return PureState(np.kron(spin.amplitudes, oam.amplitudes), oam.truncation)


def density_from_pure(psi: PureState) -> DensityMatrix:
    """Rank-1 projector |psi><psi| on psi's full product space."""
    m = np.outer(psi.amplitudes, psi.amplitudes.conj())
    return DensityMatrix(m, psi.basis_labels())


def matrix_sqrt_psd(m):
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues in [-PSD_TOL, 0) are clamped to zero; more negative input is
    an error, as is a non-Hermitian argument. Eigenvalues below a relative
    floor of 1e-14 * max are clamped too: they carry only round-off from the
    eigensolver, and sqrt would amplify that noise to the 1e-7 scale.
    """
    m = np.asarray(m, dtype=complex)
    if np.abs(m - m.conj().T).max() >= HERMITICITY_TOL:
        raise ValueError("matrix_sqrt_psd requires a Hermitian matrix")
    w, v = np.linalg.eigh(m)
    if w[0] < -PSD_TOL:
        raise ValueError(f"matrix_sqrt_psd requires PSD input, min eigenvalue {w[0]}")
    floor = 1e-14 * max(w[-1], 0.0)
    w = np.sqrt(np.where(w > floor, w, 0.0))
    root = (v * w) @ v.conj().T
    return 0.5 * (root + root.conj().T)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Square-root fidelity F = Tr sqrt(sqrt(sigma) rho sqrt(sigma)), in [0, 1].

    Evaluated as the nuclear norm of sqrt(rho) sqrt(sigma), whose singular
    values are exactly the eigenvalue square roots of the operator above but
    are computed backward-stably (a plain eigendecomposition of the product
    loses sqrt(machine-eps) accuracy on near-zero eigenvalues). Symmetric in
    its arguments; equals 1 iff the states coincide, and for a pure
    ``rho = |psi><psi|`` reduces to sqrt(<psi|sigma|psi>).
    """
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    cross = matrix_sqrt_psd(rho.entries) @ matrix_sqrt_psd(sigma.entries)
    f = float(np.linalg.svd(cross, compute_uv=False).sum())
    return min(max(f, 0.0), 1.0)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """T(rho, sigma) = (1/2) Tr |rho - sigma|."""
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    w = np.linalg.eigvalsh(rho.entries - sigma.entries)
    return 0.5 * float(np.abs(w).sum())


def _factor_structure(labels):
    """Split product-space labels into (spins, ells); requires spin-major layout."""
    spins = []
    for s, _ in labels:
        if s not in spins:
            spins.append(s)
    ells = []
    for s, l in labels:
        if s == spins[0]:
            ells.append(l)
    expected = tuple((s, l) for s in spins for l in ells)
    if expected != tuple(labels):
        raise ValueError("basis labels are not a spin-major product grid")
    return spins, ells


def partial_trace(rho: DensityMatrix, traced: str) -> DensityMatrix:
    """Trace out one factor of a spin (x) OAM density matrix.

    ``traced`` is ``"oam"`` (keep the spin marginal) or ``"spin"`` (keep the
    OAM marginal).
    """
    spins, ells = _factor_structure(rho.basis_labels)
    ns, nl = len(spins), len(ells)
    m = rho.entries.reshape(ns, nl, ns, nl)
    if traced == "oam":
        out = np.einsum("iljl->ij", m)
        labels = [(s, 0) for s in spins]
    elif traced == "spin":
        out = np.einsum("ilim->lm", m)
        labels = [(0, l) for l in ells]
    else:
        raise ValueError("traced must be 'spin' or 'oam'")
    return DensityMatrix(out, labels)


def entanglement_entropy(psi: PureState, tol: float = PSD_TOL) -> float:
    """Spin/OAM entanglement entropy in bits for states in the l=+-1 block.

    Computes the spin marginal of |psi><psi| restricted to l in {-1, +1} and
    returns S = -sum(lam * log2(lam)) over its eigenvalues. Raises if psi has
    support outside the block beyond ``tol``.
    """
    leak = sum(
        abs(psi.amplitude(s, l)) ** 2
        for s, l in psi.basis_labels()
        if l not in (-1, +1)
    )
    if leak > tol:
        raise ValueError(f"state has weight {leak} outside the l=+-1 block")
    block = np.array(
        [[psi.amplitude(s, l) for l in (-1, +1)] for s in SPIN_LABELS]
    )
    marginal = block @ block.conj().T
    w = np.linalg.eigvalsh(marginal)
    s = 0.0
    for lam in w:
        if lam > 1e-15:
            s -= lam * math.log2(lam)
    return float(s)


def angular_momentum_expectations(psi: PureState):
    """(<sigma>, <l>): diagonal spin and OAM expectations in units of hbar."""
    p = np.abs(psi.amplitudes) ** 2
    sig = 0.0
    ell = 0.0
    for w, (s, l) in zip(p, psi.basis_labels()):
        sig += w * s
        ell += w * l
    return float(sig), float(ell)


def bell_state(kind: str, truncation: int = 1) -> PureState:
    """One of the four maximally entangled spin/OAM states.

    ``psi+``/``psi-`` pair sigma+ with l=-1 and sigma- with l=+1; ``phi+``/
    ``phi-`` pair sigma+ with l=+1 and sigma- with l=-1.
    """
    if truncation < 1:
        raise ValueError("Bell states need truncation >= 1")
    a = np.zeros(2 * (2 * truncation + 1), dtype=complex)
    n = 2 * truncation + 1
    sgn = +1.0 if kind.endswith("+") else -1.0
    name = kind.lower()
    if name in ("psi+", "psi-"):
        a[0 * n + (-1 + truncation)] = 1.0          # (sigma+, -1)
        a[1 * n + (+1 + truncation)] = sgn          # (sigma-, +1)
    elif name in ("phi+", "phi-"):
        a[0 * n + (+1 + truncation)] = 1.0          # (sigma+, +1)
        a[1 * n + (-1 + truncation)] = sgn          # (sigma-, -1)
    else:
        raise ValueError(f"unknown Bell state {kind!r}")
    return PureState(a, truncation)


def restrict_to_block(rho: DensityMatrix, labels=BLOCK_LABELS, renormalize: bool = True) -> DensityMatrix:
    """Restrict a density matrix to a label subset (post-selection).

    With ``renormalize`` the block is rescaled to unit trace, which is the
    post-selected state conditioned on the photon being found in the subspace.
    """
    idx = [rho.basis_labels.index(tuple(p)) for p in labels]
    block = rho.entries[np.ix_(idx, idx)]
    tr = np.trace(block).real
    if renormalize:
        if tr <= 0:
            raise ValueError("no weight in the requested block")
        block = block / tr
    return DensityMatrix(block, labels)


def block_density(psi: PureState) -> DensityMatrix:
    """|psi><psi| restricted (and renormalized) to the standard 4-dim block."""
    return restrict_to_block(density_from_pure(psi))
