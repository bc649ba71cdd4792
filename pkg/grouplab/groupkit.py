"""Finite groups as Cayley tables, their irrep catalogs and isotypic projectors.

Element 0 is the identity in every group this module produces.
"""
import io
import json
import logging
import math
from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import IO, Iterable, Literal, Optional, Sequence

import numpy as np

from .errors import CatalogError, CayleyParseError, GroupValidationError, UnknownIrrepError

logger = logging.getLogger(__name__)

EXHAUSTIVE_ASSOCIATIVITY_MAX = 64
CATALOG_TOL = 1e-10

IrrepKind = Literal["trivial", "real", "complex"]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Group:
    """Finite group given by its multiplication table"""
    cayley: np.ndarray
    inverse: np.ndarray
    name: str
    identity: int = 0

    @property
    def order(self) -> int:
        return int(self.cayley.shape[0])

    @property
    def abelian(self) -> bool:
        return bool(np.array_equal(self.cayley, self.cayley.T))

    def mul(self, a: int, b: int) -> int:
        return int(self.cayley[a, b])

    def element_order(self, a: int) -> int:
        power, n = a, 1
        while power != self.identity:
            power = int(self.cayley[power, a])
            n += 1
        return n


def _build(cayley: np.ndarray, name: str) -> Group:
    cayley = np.asarray(cayley, dtype=np.int64)
    M = cayley.shape[0]
    # inverse[a] is the b with ab = e; row a holds e exactly once
    inverse = np.argmax(cayley == 0, axis=1).astype(np.int64)
    if M and not np.all(cayley[np.arange(M), inverse] == 0):
        raise GroupValidationError("missing inverse", "some row never reaches the identity")
    group = Group(cayley=_frozen(cayley), inverse=_frozen(inverse), name=name)
    validate_group(group)
    return group


def validate_group(group: Group, seed: int = 0) -> None:
    """Raise GroupValidationError naming the first violated invariant"""
    table = group.cayley
    M = group.order
    if table.ndim != 2 or table.shape != (M, M) or M < 1:
        raise GroupValidationError("table not square", f"shape {table.shape}")
    expected = np.arange(M)
    for a in range(M):
        if not np.array_equal(np.sort(table[a]), expected):
            raise GroupValidationError("row not a permutation", f"row {a}")
    for b in range(M):
        if not np.array_equal(np.sort(table[:, b]), expected):
            raise GroupValidationError("column not a permutation", f"column {b}")
    e = group.identity
    if not (np.array_equal(table[e], expected) and np.array_equal(table[:, e], expected)):
        raise GroupValidationError("identity", f"element {e} is not a two-sided identity")
    if not np.all(table[expected, group.inverse] == e):
        raise GroupValidationError("inverse", "cayley(a, inverse(a)) != identity")

    if M <= EXHAUSTIVE_ASSOCIATIVITY_MAX:
        left = table[table[:, :, None], expected[None, None, :]]
        right = table[expected[:, None, None], table[None, :, :]]
        bad = np.argwhere(left != right)
    else:
        rng = np.random.default_rng(seed)
        a, b, c = rng.integers(0, M, size=(3, 10 * M * M))
        mismatch = table[table[a, b], c] != table[a, table[b, c]]
        bad = np.stack([a, b, c], axis=1)[mismatch]
    if len(bad):
        a, b, c = (int(x) for x in bad[0])
        raise GroupValidationError("associativity", f"(a,b,c) = ({a},{b},{c})")


# Constructors
def make_cyclic(M: int) -> Group:
    """Z_M with cayley(a, b) = (a + b) mod M"""
    if M < 1:
        raise ValueError("cyclic order must be positive")
    idx = np.arange(M)
    return _build((idx[:, None] + idx[None, :]) % M, f"Z_{M}")


def make_product(factors: Sequence[Group]) -> Group:
    """Direct product; elements are tuples in row-major index order"""
    if not factors:
        raise ValueError("product needs at least one factor")
    orders = tuple(g.order for g in factors)
    M = math.prod(orders)
    digits = np.array(np.unravel_index(np.arange(M), orders))  # (r, M)
    comps = [g.cayley[digits[i][:, None], digits[i][None, :]] for i, g in enumerate(factors)]
    cayley = np.ravel_multi_index(tuple(comps), orders)
    return _build(cayley, "x".join(g.name for g in factors))


def make_dihedral(n: int) -> Group:
    """D_n of order 2n: index i < n is r^i, index n + i is r^i s"""
    if n < 3:
        raise ValueError("dihedral groups need n >= 3")
    cayley = np.empty((2 * n, 2 * n), dtype=np.int64)
    for a in range(2 * n):
        i, a_ref = a % n, a >= n
        for b in range(2 * n):
            j, b_ref = b % n, b >= n
            if not a_ref:
                k = (i + j) % n
            else:
                # s r^j = r^-j s
                k = (i - j) % n
            cayley[a, b] = k + n * (a_ref != b_ref)
    return _build(cayley, f"D_{n}")


def regular_rep(group: Group, h: int) -> np.ndarray:
    """Permutation matrix R_h with R_h e_a = e_{ha}"""
    M = group.order
    R = np.zeros((M, M))
    R[group.cayley[h], np.arange(M)] = 1.0
    return R


def inverse_operator(group: Group) -> np.ndarray:
    """P with P e_h = e_{h^-1}"""
    M = group.order
    P = np.zeros((M, M))
    P[group.inverse, np.arange(M)] = 1.0
    return P


# Cayley-table files
def _relabel_identity_first(table: np.ndarray) -> np.ndarray:
    M = table.shape[0]
    expected = np.arange(M)
    candidates = [e for e in range(M) if np.array_equal(table[e], expected)]
    if not candidates:
        raise GroupValidationError("identity", "no row equals the identity permutation")
    e = candidates[0]
    if e == 0:
        return table
    perm = expected.copy()
    perm[[0, e]] = perm[[e, 0]]
    relabelled = np.empty_like(table)
    relabelled[perm[:, None], perm[None, :]] = perm[table]
    logger.info("Identity found at index %d; swapped with index 0", e)
    return relabelled


def load_cayley(source: bytes | str | IO) -> Group:
    """Parse a Cayley-table file and return the validated group"""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    name: Optional[str] = None
    lines: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.lower().startswith("name:"):
            name = stripped.split(":", 1)[1].strip()
            continue
        lines.append((lineno, stripped))

    if not lines:
        raise CayleyParseError("empty Cayley-table file")
    lineno, first = lines[0]
    try:
        M = int(first)
    except ValueError:
        raise CayleyParseError(f"line {lineno}: expected the group order, got {first!r}")
    if M < 1:
        raise CayleyParseError(f"line {lineno}: group order must be positive")
    rows = lines[1:]
    if len(rows) != M:
        raise CayleyParseError(f"expected {M} table rows, found {len(rows)}")

    table = np.empty((M, M), dtype=np.int64)
    for a, (lineno, line) in enumerate(rows):
        parts = line.split()
        if len(parts) != M:
            raise CayleyParseError(f"line {lineno}: expected {M} entries, found {len(parts)}")
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise CayleyParseError(f"line {lineno}: non-integer entry")
        if min(values) < 0 or max(values) >= M:
            raise CayleyParseError(f"line {lineno}: entry out of range 0..{M - 1}")
        table[a] = values

    # Permutation checks before looking for the identity so the message names the real fault
    expected = np.arange(M)
    for a in range(M):
        if not np.array_equal(np.sort(table[a]), expected):
            raise GroupValidationError("row not a permutation", f"row {a}")
    table = _relabel_identity_first(table)
    return _build(table, name or f"G_{M}")


def dump_cayley(group: Group) -> str:
    """Canonical text form of the Cayley table"""
    out = io.StringIO()
    out.write(f"{group.order}\n")
    for row in group.cayley:
        out.write(" ".join(str(int(x)) for x in row) + "\n")
    out.write(f"name: {group.name}\n")
    return out.getvalue()


# Isomorphism oracle
def _generators(group: Group) -> list[int]:
    gens: list[int] = []
    span = {group.identity}
    for a in range(group.order):
        if a in span:
            continue
        gens.append(a)
        span = _closure(group, gens)
        if len(span) == group.order:
            break
    return gens


def _closure(group: Group, gens: list[int]) -> set[int]:
    span = {group.identity}
    frontier = [group.identity]
    while frontier:
        x = frontier.pop()
        for g in gens:
            y = int(group.cayley[x, g])
            if y not in span:
                span.add(y)
                frontier.append(y)
    return span


def find_isomorphism(g1: Group, g2: Group) -> Optional[np.ndarray]:
    """Index map φ with φ(ab) = φ(a)φ(b), or None if the groups differ"""
    if g1.order != g2.order:
        return None
    M = g1.order
    orders1 = [g1.element_order(a) for a in range(M)]
    orders2 = [g2.element_order(a) for a in range(M)]
    if sorted(orders1) != sorted(orders2):
        return None
    gens = _generators(g1)
    options = [[b for b in range(M) if orders2[b] == orders1[g]] for g in gens]

    for images in cartesian(*options):
        phi = np.full(M, -1, dtype=np.int64)
        phi[g1.identity] = g2.identity
        frontier = [g1.identity]
        consistent = True
        while frontier and consistent:
            x = frontier.pop()
            for g, img in zip(gens, images):
                y = int(g1.cayley[x, g])
                target = int(g2.cayley[phi[x], img])
                if phi[y] == -1:
                    phi[y] = target
                    frontier.append(y)
                elif phi[y] != target:
                    consistent = False
                    break
        if not consistent or len(set(phi.tolist())) != M:
            continue
        if np.array_equal(phi[g1.cayley], g2.cayley[phi[:, None], phi[None, :]]):
            return phi
    return None


# Irrep catalogs
@dataclass(frozen=True, eq=False)
class Irrep:
    """One irreducible representation: C_k(h) for every element h"""
    k: int
    dim: int
    kind: IrrepKind
    matrices: np.ndarray  # (M, dim, dim) complex
    partner: int

    @property
    def characters(self) -> np.ndarray:
        return np.trace(self.matrices, axis1=1, axis2=2)


@dataclass(frozen=True, eq=False)
class IrrepCatalog:
    entries: tuple[Irrep, ...]
    group_name: str = ""
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._index.update({irrep.k: irrep for irrep in self.entries})

    def __getitem__(self, k: int) -> Irrep:
        try:
            return self._index[k]
        except KeyError:
            raise UnknownIrrepError(f"irrep {k} not in catalog")

    def __contains__(self, k: int) -> bool:
        return k in self._index

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[int]:
        return [irrep.k for irrep in self.entries]

    @property
    def trivial(self) -> Irrep:
        return next(irrep for irrep in self.entries if irrep.kind == "trivial")

    def representative(self, k: int) -> int:
        """Smaller id of a conjugate pair (k itself for real irreps)"""
        return min(k, self[k].partner)

    def merged_labels(self) -> list[int]:
        """One representative per real irrep or complex pair, trivial excluded"""
        return sorted({self.representative(i.k) for i in self.entries if i.kind != "trivial"})


def _kind_for(k: int, partner: int, matrices: np.ndarray) -> IrrepKind:
    if matrices.shape[1] == 1 and np.allclose(matrices, 1.0):
        return "trivial"
    return "real" if partner == k else "complex"


def abelian_irreps(recipe: Sequence[int]) -> IrrepCatalog:
    """Characters of Z_M1 x ... x Z_Mr, id = row-major index of the frequency tuple"""
    orders = tuple(int(m) for m in recipe)
    if not orders or min(orders) < 1:
        raise CatalogError("abelian recipe needs positive cyclic orders")
    M = math.prod(orders)
    elements = np.array(np.unravel_index(np.arange(M), orders))  # (r, M)
    entries = []
    for k in range(M):
        freq = np.array(np.unravel_index(k, orders))
        phase = sum(freq[j] * elements[j] / orders[j] for j in range(len(orders)))
        chars = np.exp(2j * np.pi * phase)
        partner = int(np.ravel_multi_index(tuple((-freq) % np.array(orders)), orders))
        matrices = chars.reshape(M, 1, 1)
        entries.append(Irrep(k, 1, _kind_for(k, partner, matrices), _frozen(matrices), partner))
    name = "x".join(f"Z_{m}" for m in orders)
    return IrrepCatalog(tuple(entries), group_name=name)


def dihedral_irreps(n: int) -> IrrepCatalog:
    """Irreps of D_n in the element order used by make_dihedral"""
    if n < 3:
        raise CatalogError("dihedral catalogs need n >= 3")
    M = 2 * n
    i = np.arange(M) % n
    reflection = np.arange(M) >= n
    one_dim = [np.ones(M), np.where(reflection, -1.0, 1.0)]
    if n % 2 == 0:
        alt = (-1.0) ** i
        one_dim += [alt, np.where(reflection, -alt, alt)]

    entries: list[Irrep] = []
    for k, chars in enumerate(one_dim):
        matrices = chars.astype(np.complex128).reshape(M, 1, 1)
        entries.append(Irrep(k, 1, _kind_for(k, k, matrices), _frozen(matrices), k))
    flip = np.diag([1.0, -1.0])
    for j in range(1, (n - 1) // 2 + 1):
        theta = 2 * np.pi * j * i / n
        rot = np.stack(
            [np.stack([np.cos(theta), -np.sin(theta)], axis=-1),
             np.stack([np.sin(theta), np.cos(theta)], axis=-1)],
            axis=1,
        )
        matrices = np.where(reflection[:, None, None], rot @ flip, rot).astype(np.complex128)
        k = len(entries)
        entries.append(Irrep(k, 2, "real", _frozen(matrices), k))
    return IrrepCatalog(tuple(entries), group_name=f"D_{n}")


def catalog_for(group: Group, recipe: Optional[tuple[str, Sequence[int]]] = None) -> Optional[IrrepCatalog]:
    """Catalog for a recipe-built group, or None when no recipe applies"""
    if recipe is None:
        return None
    kind, params = recipe
    if kind in ("cyclic", "product"):
        return abelian_irreps(params)
    if kind == "dihedral":
        return dihedral_irreps(params[0])
    return None


def validate_catalog(catalog: IrrepCatalog, group: Group, seed: int = 0) -> None:
    """Raise CatalogError on the first catalog invariant that fails"""
    M = group.order
    if any(irrep.matrices.shape[0] != M for irrep in catalog):
        raise CatalogError("catalog size does not match group order")
    if sum(irrep.dim ** 2 for irrep in catalog) != M:
        raise CatalogError("dimension sum: sum of d_k^2 differs from the group order")

    if M <= EXHAUSTIVE_ASSOCIATIVITY_MAX:
        a, b = (x.ravel() for x in np.meshgrid(np.arange(M), np.arange(M), indexing="ij"))
    else:
        rng = np.random.default_rng(seed)
        a, b = rng.integers(0, M, size=(2, 10 * M))
    for irrep in catalog:
        C = irrep.matrices
        lhs = C[a] @ C[b]
        rhs = C[group.cayley[a, b]]
        if np.abs(lhs - rhs).max() > CATALOG_TOL:
            raise CatalogError(f"homomorphism fails for irrep {irrep.k}")
        eye = np.eye(irrep.dim)
        if np.abs(C @ np.conj(np.transpose(C, (0, 2, 1))) - eye).max() > CATALOG_TOL:
            raise CatalogError(f"unitarity fails for irrep {irrep.k}")
        partner = catalog[irrep.partner]
        if np.abs(partner.characters - np.conj(irrep.characters)).max() > CATALOG_TOL:
            raise CatalogError(f"partner of irrep {irrep.k} is not its conjugate")

    chars = np.stack([irrep.characters for irrep in catalog])
    gram = chars @ np.conj(chars).T / M
    if np.abs(gram - np.eye(len(catalog))).max() > CATALOG_TOL:
        raise CatalogError("character orthogonality fails")


def load_catalog(source: bytes | str | IO, group: Optional[Group] = None) -> IrrepCatalog:
    """Read a JSON irrep sidecar: [{k, dim, partner, matrices: [h][i][j] = [re, im]}]"""
    if not isinstance(source, (bytes, str)):
        source = source.read()
    try:
        payload = json.loads(source)
        entries = []
        for item in payload:
            raw = np.asarray(item["matrices"], dtype=np.float64)
            matrices = raw[..., 0] + 1j * raw[..., 1]
            k, partner = int(item["k"]), int(item.get("partner", item["k"]))
            if matrices.shape[1:] != (item["dim"], item["dim"]):
                raise CatalogError(f"irrep {k}: matrices do not have dimension {item['dim']}")
            kind = item.get("kind") or _kind_for(k, partner, matrices)
            entries.append(Irrep(k, int(item["dim"]), kind, _frozen(matrices), partner))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CatalogError(f"malformed irrep sidecar: {exc}") from exc
    catalog = IrrepCatalog(tuple(entries), group_name=group.name if group else "")
    if group is not None:
        validate_catalog(catalog, group)
    return catalog


def dump_catalog(catalog: IrrepCatalog) -> str:
    payload = [
        {
            "k": irrep.k,
            "dim": irrep.dim,
            "partner": irrep.partner,
            "kind": irrep.kind,
            "matrices": np.stack([irrep.matrices.real, irrep.matrices.imag], axis=-1).tolist(),
        }
        for irrep in catalog
    ]
    return json.dumps(payload)


# Projectors
def isotypic_projector(catalog: IrrepCatalog, k: int, group: Group) -> np.ndarray:
    """Π_k = (d_k/M) Σ_g conj(χ_k(g)) R_g, so Π_k[a, b] = (d_k/M) conj(χ_k(a b^-1))"""
    irrep = catalog[k]
    M = group.order
    chars = irrep.characters
    idx = group.cayley[np.arange(M)[:, None], group.inverse[None, :]]
    proj = (irrep.dim / M) * np.conj(chars[idx])
    if irrep.kind != "complex":
        return np.ascontiguousarray(proj.real)
    return proj


def pair_projector(catalog: IrrepCatalog, k: int, group: Group) -> np.ndarray:
    """Real projector onto irrep k together with its conjugate partner"""
    irrep = catalog[k]
    proj = isotypic_projector(catalog, k, group)
    if irrep.kind == "complex":
        proj = (proj + isotypic_projector(catalog, irrep.partner, group)).real
    return np.ascontiguousarray(proj)


def complement_projector(catalog: IrrepCatalog, group: Group, suppressed: Iterable[int]) -> np.ndarray:
    """Σ Π_k over nontrivial irreps k outside the suppressed set (real part)"""
    suppressed = set(suppressed)
    for k in suppressed:
        catalog[k]  # raises for unknown ids
    M = group.order
    total = np.zeros((M, M), dtype=np.complex128)
    for irrep in catalog:
        if irrep.kind == "trivial" or irrep.k in suppressed:
            continue
        total = total + isotypic_projector(catalog, irrep.k, group)
    return np.ascontiguousarray(total.real)
