#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MOTEUR TENSEUR - Tenseurs à axes nommés + différentiation inverse
==================================================================
Valeur universelle des équations d'attention : un torch.Tensor float64 dont
chaque axe porte un rôle (source, space, time, depth, joint, ...).

Le calcul et l'autograd sont délégués à torch ; ce module garantit les
contrats de forme par rôle (alignement, contraction, axes externes) et fournit :
- les opérations avant (produit scalaire généralisé, softmax, dense, LayerNorm,
  dropout, concaténation),
- le ParameterStore (initialisation déterministe par nom),
- le GradientTape + backward(),
- l'oracle par différences finies centrées.
"""
import math
import string
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from avscope.base.erreurs import ErreurDonnees, ErreurForme, ErreurParametre
from avscope.moteurs.conteneur_avsc import ecrire_conteneur, lire_conteneur

DTYPE = torch.float64
EPS_LAYER_NORM = 1e-6
PRIME = "'"


class AxisRole(str, Enum):
    SOURCE = "source"
    SPACE = "space"
    TIME = "time"
    DEPTH = "depth"
    JOINT = "joint"
    QUERYPOS = "querypos"
    BATCH = "batch"
    HEAD = "head"


Role = Union[AxisRole, str]


def nom_axe(role: Role) -> str:
    return role.value if isinstance(role, AxisRole) else str(role)


def prime(role: Role) -> str:
    """Copie côté clé d'un axe déjà présent côté requête (time -> time')."""
    return nom_axe(role) + PRIME


def _noms(roles: Iterable[Role]) -> List[str]:
    return [nom_axe(r) for r in roles]


# ========================================
# 1. AxisTaggedTensor
# ========================================

@dataclass(frozen=True, eq=False)
class AxisTaggedTensor:
    data: torch.Tensor
    axes: Tuple[str, ...]

    def __post_init__(self):
        axes = tuple(_noms(self.axes))
        object.__setattr__(self, "axes", axes)
        if not isinstance(self.data, torch.Tensor):
            object.__setattr__(self, "data", torch.as_tensor(self.data, dtype=DTYPE))
        elif self.data.dtype != DTYPE:
            object.__setattr__(self, "data", self.data.to(DTYPE))
        if self.data.dim() != len(axes):
            raise ErreurForme(f"{len(axes)} rôles pour un tenseur de rang {self.data.dim()}")
        vus = set()
        for role in axes:
            if role in vus:
                raise ErreurForme(f"Rôle d'axe dupliqué : {role}", axe=role)
            vus.add(role)

    @classmethod
    def depuis(cls, valeurs, axes: Sequence[Role]) -> "AxisTaggedTensor":
        return cls(torch.as_tensor(np.asarray(valeurs, dtype=np.float64)), tuple(axes))

    @property
    def shape(self) -> Tuple[Tuple[str, int], ...]:
        return tuple(zip(self.axes, self.data.shape))

    def numel(self) -> int:
        return self.data.numel()

    def a_axe(self, role: Role) -> bool:
        return nom_axe(role) in self.axes

    def indice(self, role: Role) -> int:
        nom = nom_axe(role)
        if nom not in self.axes:
            raise ErreurForme(f"Axe '{nom}' absent (axes: {self.axes})", axe=nom)
        return self.axes.index(nom)

    def etendue(self, role: Role) -> int:
        return self.data.shape[self.indice(role)]

    def permuter(self, ordre: Sequence[Role]) -> "AxisTaggedTensor":
        ordre = _noms(ordre)
        if sorted(ordre) != sorted(self.axes):
            raise ErreurForme(f"Permutation invalide {ordre} pour {self.axes}")
        if tuple(ordre) == self.axes:
            return self
        return AxisTaggedTensor(self.data.permute(*[self.axes.index(r) for r in ordre]), tuple(ordre))

    def renommer(self, correspondance: Mapping[Role, Role]) -> "AxisTaggedTensor":
        table = {nom_axe(k): nom_axe(v) for k, v in correspondance.items()}
        return AxisTaggedTensor(self.data, tuple(table.get(r, r) for r in self.axes))

    def tranche(self, role: Role, debut: int, fin: int) -> "AxisTaggedTensor":
        i = self.indice(role)
        return AxisTaggedTensor(self.data.narrow(i, debut, fin - debut), self.axes)

    def somme(self, roles: Iterable[Role]) -> "AxisTaggedTensor":
        roles = _noms(roles)
        dims = [self.indice(r) for r in roles]
        return AxisTaggedTensor(self.data.sum(dim=dims), tuple(r for r in self.axes if r not in roles))

    def moyenne(self, roles: Iterable[Role]) -> "AxisTaggedTensor":
        roles = _noms(roles)
        dims = [self.indice(r) for r in roles]
        return AxisTaggedTensor(self.data.mean(dim=dims), tuple(r for r in self.axes if r not in roles))

    def aligner_sur(self, autre: "AxisTaggedTensor") -> "AxisTaggedTensor":
        """Permute self dans l'ordre des axes de `autre` (mêmes rôles, mêmes étendues)."""
        if set(self.axes) != set(autre.axes):
            raise ErreurForme(f"Rôles incompatibles : {self.axes} vs {autre.axes}")
        aligne = self.permuter(autre.axes)
        for role, n1, n2 in zip(autre.axes, autre.data.shape, aligne.data.shape):
            if n1 != n2:
                raise ErreurForme(f"Étendue différente sur l'axe '{role}' ({n1} vs {n2})", axe=role)
        return aligne

    def __add__(self, autre):
        if isinstance(autre, AxisTaggedTensor):
            return AxisTaggedTensor(self.data + autre.aligner_sur(self).data, self.axes)
        return AxisTaggedTensor(self.data + autre, self.axes)

    def __sub__(self, autre):
        if isinstance(autre, AxisTaggedTensor):
            return AxisTaggedTensor(self.data - autre.aligner_sur(self).data, self.axes)
        return AxisTaggedTensor(self.data - autre, self.axes)

    def __mul__(self, autre):
        if isinstance(autre, AxisTaggedTensor):
            return AxisTaggedTensor(self.data * autre.aligner_sur(self).data, self.axes)
        return AxisTaggedTensor(self.data * autre, self.axes)

    __rmul__ = __mul__

    def numpy(self) -> np.ndarray:
        return self.data.detach().cpu().numpy()

    def est_fini(self) -> bool:
        return bool(torch.isfinite(self.data).all())


# ========================================
# 2. OPÉRATIONS AVANT
# ========================================

def tensor_inner_product(
    Z1: AxisTaggedTensor,
    Z2: AxisTaggedTensor,
    reduce_axes: Iterable[Role],
    outer_axes: Iterable[Role] = (),
) -> AxisTaggedTensor:
    """
    ⟨Z1, Z2⟩_A généralisé.
    - axes de réduction : présents dans Z1 et Z2, contractés ;
    - axes externes de Z2 : conservés en sortie (primés s'ils existent aussi dans Z1) ;
    - autres axes partagés : alignés élément par élément ;
    - axes de Z2 absents de Z1 : ajoutés en sortie.
    Ordre de sortie : axes restants de Z1, puis nouveaux axes de Z2.
    """
    reduction = _noms(reduce_axes)
    externes = set(_noms(outer_axes))

    for role in reduction:
        if role not in Z2.axes:
            raise ErreurForme(f"Axe de réduction '{role}' absent de Z2 {Z2.axes}", axe=role)
        if role not in Z1.axes:
            raise ErreurForme(f"Axe de réduction '{role}' absent de Z1 {Z1.axes}", axe=role)
    for role in externes:
        if role not in Z2.axes:
            raise ErreurForme(f"Axe externe '{role}' absent de Z2 {Z2.axes}", axe=role)
        if role in reduction:
            raise ErreurForme(f"Axe '{role}' à la fois réduit et externe", axe=role)

    lettres = iter(string.ascii_letters)
    lettre_z1 = {role: next(lettres) for role in Z1.axes}
    sous_z2, sortie_z2 = [], []
    for role, etendue in zip(Z2.axes, Z2.data.shape):
        partage = role in lettre_z1 and role not in externes
        if partage:
            etendue_z1 = Z1.etendue(role)
            if etendue_z1 != etendue:
                raise ErreurForme(
                    f"Étendue différente sur l'axe partagé '{role}' ({etendue_z1} vs {etendue})", axe=role
                )
            sous_z2.append(lettre_z1[role])
        else:
            lettre = next(lettres)
            sous_z2.append(lettre)
            sortie_z2.append((prime(role) if role in lettre_z1 else role, lettre))

    axes_sortie = [r for r in Z1.axes if r not in reduction] + [nom for nom, _ in sortie_z2]
    indices_sortie = "".join(lettre_z1[r] for r in Z1.axes if r not in reduction) + "".join(l for _, l in sortie_z2)
    equation = f"{''.join(lettre_z1[r] for r in Z1.axes)},{''.join(sous_z2)}->{indices_sortie}"
    return AxisTaggedTensor(torch.einsum(equation, Z1.data, Z2.data), tuple(axes_sortie))


def softmax_over_axes(t: AxisTaggedTensor, axes: Iterable[Role]) -> AxisTaggedTensor:
    """softmax conjoint sur les axes donnés (soustraction du max assurée par torch)."""
    roles = _noms(axes)
    if not roles:
        raise ErreurForme("softmax_over_axes: ensemble d'axes vide")
    for role in roles:
        t.indice(role)

    autres = [r for r in t.axes if r not in roles]
    p = t.permuter(autres + roles)
    forme_autres = p.data.shape[: len(autres)]
    plat = p.data.reshape(*forme_autres, -1)
    sortie = torch.softmax(plat, dim=-1).reshape(p.data.shape)
    return AxisTaggedTensor(sortie, tuple(autres + roles)).permuter(t.axes)


def dense(params: "ParameterStore", name: str, t: AxisTaggedTensor, out_depth: int) -> AxisTaggedTensor:
    """out[..., j] = Σ_i t[..., i]·W[i, j] + b[j] sur l'axe DEPTH ; les autres axes sont préservés."""
    W = params.brut(f"{name}/w")
    b = params.brut(f"{name}/b")
    d_in = t.etendue(AxisRole.DEPTH)
    if tuple(W.shape) != (d_in, out_depth):
        raise ErreurForme(
            f"dense '{name}': poids {tuple(W.shape)} incompatibles avec depth {d_in} -> {out_depth}",
            axe=AxisRole.DEPTH.value,
        )
    i = t.indice(AxisRole.DEPTH)
    y = torch.matmul(t.data.movedim(i, -1), W) + b
    return AxisTaggedTensor(y.movedim(-1, i), t.axes)


def layer_norm(params: "ParameterStore", name: str, t: AxisTaggedTensor, eps: float = EPS_LAYER_NORM) -> AxisTaggedTensor:
    """Normalisation sur DEPTH uniquement, gain/biais appris."""
    d = t.etendue(AxisRole.DEPTH)
    if d == 0:
        raise ErreurForme("layer_norm: étendue DEPTH nulle", axe=AxisRole.DEPTH.value)
    gain = params.brut(f"{name}/g")
    biais = params.brut(f"{name}/b")
    i = t.indice(AxisRole.DEPTH)
    y = F.layer_norm(t.data.movedim(i, -1), (d,), gain, biais, eps)
    return AxisTaggedTensor(y.movedim(-1, i), t.axes)


def dropout(t: AxisTaggedTensor, rate: float, generateur: Optional[torch.Generator], training: bool) -> AxisTaggedTensor:
    if not 0.0 <= rate < 1.0:
        raise ErreurDonnees(f"dropout: taux invalide {rate} (attendu 0 ≤ rate < 1)")
    if not training or rate == 0.0:
        return t
    if generateur is None:
        raise ErreurDonnees("dropout: un générateur est requis en mode entraînement")
    garde = torch.rand(t.data.shape, generator=generateur, dtype=DTYPE) >= rate
    return AxisTaggedTensor(t.data * garde / (1.0 - rate), t.axes)


def concat(tensors: Sequence[AxisTaggedTensor], axis: Role) -> AxisTaggedTensor:
    if not tensors:
        raise ErreurForme("concat: liste vide")
    role = nom_axe(axis)
    reference = tensors[0]
    dim = reference.indice(role)
    alignes = []
    for t in tensors:
        if set(t.axes) != set(reference.axes):
            raise ErreurForme(f"concat: rôles incompatibles {t.axes} vs {reference.axes}")
        t = t.permuter(reference.axes)
        for r, n_ref, n in zip(reference.axes, reference.data.shape, t.data.shape):
            if r != role and n_ref != n:
                raise ErreurForme(f"concat: étendue différente sur l'axe '{r}' ({n_ref} vs {n})", axe=r)
        alignes.append(t.data)
    if len(alignes) == 1:
        return reference
    return AxisTaggedTensor(torch.cat(alignes, dim=dim), reference.axes)


# ========================================
# 3. PARAMETER STORE
# ========================================

class ParameterStore:
    """
    Paramètres nommés (nom -> tenseur float64 feuille).
    L'initialisation de chaque paramètre dépend uniquement de (graine, nom) :
    deux stores construits avec la même graine et la même architecture sont bit-identiques,
    quel que soit l'ordre des déclarations.
    """

    def __init__(self, graine: int = 0):
        self.graine = int(graine)
        self._tenseurs: Dict[str, torch.Tensor] = {}

    def _generateur(self, nom: str) -> torch.Generator:
        g = torch.Generator()
        g.manual_seed((self.graine * 1_000_003 + zlib.crc32(nom.encode("utf-8"))) % (2 ** 63 - 1))
        return g

    def declarer(self, nom: str, forme: Sequence[int], init: str = "uniforme", fan_in: Optional[int] = None) -> torch.Tensor:
        if nom in self._tenseurs:
            raise ErreurParametre(f"Paramètre déjà déclaré : {nom}", nom=nom)
        forme = tuple(int(n) for n in forme)
        if init == "uniforme":
            borne = 1.0 / math.sqrt(fan_in or forme[0])
            valeur = (torch.rand(forme, generator=self._generateur(nom), dtype=DTYPE) * 2.0 - 1.0) * borne
        elif init == "zeros":
            valeur = torch.zeros(forme, dtype=DTYPE)
        elif init == "uns":
            valeur = torch.ones(forme, dtype=DTYPE)
        else:
            raise ErreurDonnees(f"Initialisation inconnue : {init}")
        valeur.requires_grad_(True)
        self._tenseurs[nom] = valeur
        return valeur

    def declarer_dense(self, nom: str, d_in: int, d_out: int) -> None:
        self.declarer(f"{nom}/w", (d_in, d_out), fan_in=d_in)
        self.declarer(f"{nom}/b", (d_out,), init="zeros")

    def declarer_norme(self, nom: str, d: int) -> None:
        self.declarer(f"{nom}/g", (d,), init="uns")
        self.declarer(f"{nom}/b", (d,), init="zeros")

    def brut(self, nom: str) -> torch.Tensor:
        try:
            return self._tenseurs[nom]
        except KeyError:
            raise ErreurParametre(f"Paramètre manquant : {nom}", nom=nom) from None

    def __getitem__(self, nom: str) -> AxisTaggedTensor:
        t = self.brut(nom)
        return AxisTaggedTensor(t, tuple(f"axe{i}" for i in range(t.dim())))

    def __contains__(self, nom: str) -> bool:
        return nom in self._tenseurs

    def __len__(self) -> int:
        return len(self._tenseurs)

    def noms(self, prefixe: str = "") -> List[str]:
        return [n for n in self._tenseurs if n.startswith(prefixe)]

    def tenseurs(self, prefixe: str = "") -> List[torch.Tensor]:
        return [t for n, t in self._tenseurs.items() if n.startswith(prefixe)]

    def nb_scalaires(self, prefixe: str = "") -> int:
        return sum(t.numel() for t in self.tenseurs(prefixe))

    def copier(self) -> "ParameterStore":
        copie = ParameterStore(self.graine)
        for nom, t in self._tenseurs.items():
            copie._tenseurs[nom] = t.detach().clone().requires_grad_(True)
        return copie

    def charger_valeurs(self, valeurs: Mapping[str, Union[np.ndarray, torch.Tensor]], prefixe: str = "", strict: bool = True) -> int:
        """Copie en place les valeurs dont le nom commence par `prefixe` ; renvoie le nombre chargé."""
        charges = 0
        with torch.no_grad():
            for nom, valeur in valeurs.items():
                if not nom.startswith(prefixe):
                    continue
                if nom not in self._tenseurs:
                    if strict:
                        raise ErreurParametre(f"Paramètre inconnu dans la source : {nom}", nom=nom)
                    continue
                cible = self._tenseurs[nom]
                source = torch.as_tensor(np.asarray(valeur, dtype=np.float64)) if not isinstance(valeur, torch.Tensor) else valeur.detach()
                if tuple(source.shape) != tuple(cible.shape):
                    raise ErreurParametre(
                        f"Forme incompatible pour {nom}: {tuple(source.shape)} vs {tuple(cible.shape)}", nom=nom
                    )
                cible.copy_(source.to(DTYPE))
                charges += 1
        if strict:
            manquants = [n for n in self.noms(prefixe) if n not in valeurs]
            if manquants:
                raise ErreurParametre(f"Paramètres absents de la source : {manquants[:5]}", nom=manquants[0])
        return charges

    def identique(self, autre: "ParameterStore") -> bool:
        if list(self._tenseurs) != list(autre._tenseurs):
            return False
        return all(torch.equal(self._tenseurs[n].detach(), autre._tenseurs[n].detach()) for n in self._tenseurs)

    def valeurs(self) -> Dict[str, torch.Tensor]:
        return {n: t.detach() for n, t in self._tenseurs.items()}

    def sauvegarder(self, chemin: Union[str, Path]) -> Path:
        return ecrire_conteneur(chemin, self.valeurs())

    @classmethod
    def charger(cls, chemin: Union[str, Path], graine: int = 0) -> "ParameterStore":
        store = cls(graine)
        for nom, tableau in lire_conteneur(chemin).items():
            store._tenseurs[nom] = torch.as_tensor(tableau.copy(), dtype=DTYPE).requires_grad_(True)
        return store


# ========================================
# 4. DIFFÉRENTIATION
# ========================================

class GradientTape:
    """
    Enregistre le graphe des opérations (autograd torch) sur les paramètres du store.
    Usage :
        with GradientTape(store) as tape:
            perte = ...
        gradients = backward(tape, perte)
    """

    def __init__(self, params: ParameterStore):
        self.params = params
        self.gradients: Dict[str, torch.Tensor] = {}
        self._contexte = None

    def __enter__(self) -> "GradientTape":
        self._contexte = torch.enable_grad()
        self._contexte.__enter__()
        for t in self.params.tenseurs():
            t.requires_grad_(True)
        return self

    def __exit__(self, *exc) -> bool:
        self._contexte.__exit__(*exc)
        return False


def backward(tape: GradientTape, scalar_loss, conserver_graphe: bool = False) -> Dict[str, torch.Tensor]:
    """Gradients de la perte pour chaque paramètre ; zéro pour les paramètres non atteints."""
    valeur = scalar_loss.data if isinstance(scalar_loss, AxisTaggedTensor) else scalar_loss
    if not isinstance(valeur, torch.Tensor) or valeur.numel() != 1:
        raise ErreurForme("backward: la perte doit être un scalaire")

    noms = tape.params.noms()
    tenseurs = [tape.params.brut(n) for n in noms]
    if valeur.requires_grad:
        grads = torch.autograd.grad(valeur.reshape(()), tenseurs, allow_unused=True, retain_graph=conserver_graphe)
    else:
        grads = [None] * len(tenseurs)
    tape.gradients = {
        n: (g.detach() if g is not None else torch.zeros_like(t.detach()))
        for n, g, t in zip(noms, grads, tenseurs)
    }
    return tape.gradients


def finite_difference_gradient(
    f: Callable[[ParameterStore], float],
    params: ParameterStore,
    h: float = 1e-4,
    noms: Optional[Sequence[str]] = None,
) -> Dict[str, torch.Tensor]:
    """Oracle : (f(p+h) − f(p−h)) / 2h coordonnée par coordonnée (au point anguleux de |x|, donne 0)."""
    if h <= 0:
        raise ErreurDonnees(f"finite_difference_gradient: pas h invalide ({h})")
    gradients = {}
    with torch.no_grad():
        for nom in (noms if noms is not None else params.noms()):
            t = params.brut(nom)
            plat = t.view(-1)
            g = torch.zeros(plat.shape[0], dtype=DTYPE)
            for i in range(plat.shape[0]):
                origine = plat[i].item()
                plat[i] = origine + h
                f_plus = float(f(params))
                plat[i] = origine - h
                f_moins = float(f(params))
                plat[i] = origine
                g[i] = (f_plus - f_moins) / (2.0 * h)
            gradients[nom] = g.reshape(t.shape)
    return gradients


def erreur_relative(analytique: torch.Tensor, numerique: torch.Tensor, plancher: float = 1e-8) -> torch.Tensor:
    """|a − n| / max(|a|, |n|, plancher), coordonnée par coordonnée."""
    echelle = torch.maximum(torch.maximum(analytique.abs(), numerique.abs()), torch.full_like(analytique, plancher))
    return (analytique - numerique).abs() / echelle
