#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MOTEUR ATTENTION - Attention généralisée, multi-têtes et pooling attentionnel
==============================================================================
- attention() : α = softmax_A((1/√D)·⟨f_K(K), f_Q(Q)⟩_D), sortie = ⟨α, f_V(V)⟩_A
- multi_head_attention() : H têtes empilées sur un axe HEAD, clés = valeurs = f_V(V),
  concaténation sur DEPTH puis couche dense finale f.
- attentional_pooling() : requête = Σ_t ẑ_t, une position par source.

Les axes attendus A sont portés par K/V. Un axe attendu qui existe aussi côté requête
est primé côté clé (time -> time') ; les autres axes partagés sont alignés.

Chaque tenseur α passe par le CompteurAttention actif (contextvars) pour la
comptabilité mémoire joint / séparable.
"""
import math
from contextlib import contextmanager, nullcontext
from contextvars import ContextVar
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Tuple

import torch

from avscope.base.erreurs import ErreurConfiguration, ErreurForme
from avscope.moteurs.moteur_tenseur import (
    AxisRole,
    AxisTaggedTensor,
    DTYPE,
    ParameterStore,
    dense,
    nom_axe,
    prime,
    softmax_over_axes,
    tensor_inner_product,
)

DEPTH = AxisRole.DEPTH.value
HEAD = AxisRole.HEAD.value


@dataclass(frozen=True)
class AttentionConfig:
    depth: int = 64
    heads: int = 4
    attended_axes: Tuple[str, ...] = (AxisRole.TIME.value,)
    dropout: float = 0.1
    distinct_key_projection: bool = False

    def __post_init__(self):
        object.__setattr__(self, "attended_axes", tuple(nom_axe(a) for a in self.attended_axes))
        if self.depth <= 0 or self.heads <= 0:
            raise ErreurConfiguration(f"AttentionConfig: D={self.depth} et H={self.heads} doivent être positifs")
        if self.depth % self.heads != 0:
            raise ErreurConfiguration(f"AttentionConfig: D={self.depth} non divisible par H={self.heads}")
        if not self.attended_axes:
            raise ErreurConfiguration("AttentionConfig: axes attendus vides")
        if not 0.0 <= self.dropout < 1.0:
            raise ErreurConfiguration(f"AttentionConfig: dropout invalide ({self.dropout})")

    @property
    def profondeur_tete(self) -> int:
        return self.depth // self.heads

    def sur(self, axes: Iterable) -> "AttentionConfig":
        return replace(self, attended_axes=tuple(nom_axe(a) for a in axes))


# ========================================
# COMPTEUR DE TENSEURS D'ATTENTION
# ========================================

_compteur_actif: ContextVar[Optional["CompteurAttention"]] = ContextVar("compteur_attention", default=None)


class CompteurAttention:
    """
    Compte les éléments de chaque tenseur α produit pendant un forward.
    Une étape regroupe les α vivants simultanément (ex: les deux attentions temporelles
    par modalité d'un bloc séparable). Hors étape, chaque α forme sa propre étape.
    """

    def __init__(self):
        self.tenseurs: List[int] = []
        self.etapes: List[int] = []
        self._etape_courante: Optional[int] = None

    def __enter__(self) -> "CompteurAttention":
        self._jeton = _compteur_actif.set(self)
        return self

    def __exit__(self, *exc) -> bool:
        _compteur_actif.reset(self._jeton)
        return False

    @contextmanager
    def etape(self):
        if self._etape_courante is not None:
            yield
            return
        self._etape_courante = 0
        try:
            yield
        finally:
            if self._etape_courante:
                self.etapes.append(self._etape_courante)
            self._etape_courante = None

    def enregistrer(self, nb_elements: int) -> None:
        self.tenseurs.append(nb_elements)
        if self._etape_courante is None:
            self.etapes.append(nb_elements)
        else:
            self._etape_courante += nb_elements

    @property
    def pic_etape(self) -> int:
        return max(self.etapes, default=0)

    @property
    def pic_tenseur(self) -> int:
        return max(self.tenseurs, default=0)


def etape_attention():
    """Ouvre une étape sur le compteur actif (sans effet s'il n'y en a pas)."""
    compteur = _compteur_actif.get()
    return compteur.etape() if compteur is not None else nullcontext()


def _enregistrer_alpha(alpha: AxisTaggedTensor) -> None:
    compteur = _compteur_actif.get()
    if compteur is not None:
        compteur.enregistrer(alpha.numel())


# ========================================
# NOYAU
# ========================================

def _verifier_axes(q: AxisTaggedTensor, v: AxisTaggedTensor, axes: List[str]) -> None:
    for role in axes:
        if not v.a_axe(role):
            raise ErreurForme(f"Axe attendu '{role}' absent des valeurs {v.axes}", axe=role)
        if role == DEPTH:
            raise ErreurForme("DEPTH ne peut pas être un axe attendu", axe=role)
    for role in v.axes:
        if role != DEPTH and role not in axes and not q.a_axe(role):
            raise ErreurForme(f"Axe '{role}' des valeurs ni attendu ni présent côté requête", axe=role)
    if q.etendue(DEPTH) != v.etendue(DEPTH):
        raise ErreurForme(
            f"Profondeurs différentes requête/valeurs ({q.etendue(DEPTH)} vs {v.etendue(DEPTH)})", axe=DEPTH
        )


def _noyau(q: AxisTaggedTensor, k: AxisTaggedTensor, v: AxisTaggedTensor, axes: List[str]) -> AxisTaggedTensor:
    """q, k, v déjà projetés. Sortie : axes non-DEPTH de q, puis DEPTH."""
    echelle = 1.0 / math.sqrt(q.etendue(DEPTH))
    logits = tensor_inner_product(q, k, {DEPTH}, outer_axes=axes) * echelle
    attendus = [prime(a) if q.a_axe(a) else a for a in axes]
    alpha = softmax_over_axes(logits, attendus)
    _enregistrer_alpha(alpha)
    v_renomme = v.renommer({a: prime(a) for a in axes if q.a_axe(a)})
    return tensor_inner_product(alpha, v_renomme, attendus)


def attention(
    Q: AxisTaggedTensor,
    K: AxisTaggedTensor,
    V: AxisTaggedTensor,
    axes: Iterable,
    params: Optional[ParameterStore] = None,
    prefixe: Optional[str] = None,
) -> AxisTaggedTensor:
    """
    Attention généralisée à une tête.
    Sans `prefixe`, les projections sont l'identité. Avec `prefixe`, les couches
    `{prefixe}/q` et `{prefixe}/v` sont utilisées ; `{prefixe}/k` si elle existe, sinon f_V
    projette aussi les clés.
    """
    axes = [nom_axe(a) for a in axes]
    if K.axes and set(K.axes) != set(V.axes):
        raise ErreurForme(f"K et V doivent partager leurs axes ({K.axes} vs {V.axes})")
    _verifier_axes(Q, V, axes)

    if prefixe is None:
        q, k, v = Q, K, V
    else:
        d_sortie = params.brut(f"{prefixe}/q/w").shape[1]
        q = dense(params, f"{prefixe}/q", Q, d_sortie)
        v = dense(params, f"{prefixe}/v", V, d_sortie)
        nom_k = f"{prefixe}/k" if f"{prefixe}/k/w" in params else f"{prefixe}/v"
        k = dense(params, nom_k, K, d_sortie)
    return _noyau(q, k, v, axes).permuter(Q.axes)


def _projection_tetes(params: ParameterStore, prefixe: str, suffixe: str, t: AxisTaggedTensor, heads: int) -> AxisTaggedTensor:
    """Projections par tête empilées sur un axe HEAD placé en tête."""
    W = torch.stack([params.brut(f"{prefixe}/head{h}/{suffixe}/w") for h in range(heads)])
    b = torch.stack([params.brut(f"{prefixe}/head{h}/{suffixe}/b") for h in range(heads)])
    if W.shape[1] != t.etendue(DEPTH):
        raise ErreurForme(f"{prefixe}/{suffixe}: depth {t.etendue(DEPTH)} au lieu de {W.shape[1]}", axe=DEPTH)
    i = t.indice(DEPTH)
    x = t.data.movedim(i, -1)
    y = torch.einsum("...d,hde->h...e", x, W) + b.reshape((heads,) + (1,) * (x.dim() - 1) + (W.shape[2],))
    return AxisTaggedTensor(y.movedim(-1, i + 1), (HEAD,) + t.axes)


def multi_head_attention(
    cfg: AttentionConfig,
    params: ParameterStore,
    Q: AxisTaggedTensor,
    V: AxisTaggedTensor,
    axes: Optional[Iterable] = None,
    prefixe: str = "mha",
) -> AxisTaggedTensor:
    axes = [nom_axe(a) for a in (axes if axes is not None else cfg.attended_axes)]
    if not axes:
        raise ErreurForme("multi_head_attention: axes attendus vides")
    _verifier_axes(Q, V, axes)
    if Q.etendue(DEPTH) != cfg.depth:
        raise ErreurForme(f"multi_head_attention: depth {Q.etendue(DEPTH)} au lieu de {cfg.depth}", axe=DEPTH)

    q = _projection_tetes(params, prefixe, "q", Q, cfg.heads)
    v = _projection_tetes(params, prefixe, "v", V, cfg.heads)
    k = _projection_tetes(params, prefixe, "k", V, cfg.heads) if cfg.distinct_key_projection else v
    o = _noyau(q, k, v, axes)

    # concaténation des têtes sur DEPTH : la tête h occupe [h·D/H, (h+1)·D/H)
    autres = [r for r in o.axes if r not in (HEAD, DEPTH)]
    o = o.permuter(autres + [HEAD, DEPTH])
    concat_tetes = AxisTaggedTensor(o.data.reshape(*o.data.shape[:-2], cfg.depth), tuple(autres + [DEPTH]))
    return dense(params, f"{prefixe}/out", concat_tetes, cfg.depth).permuter(Q.axes)


def attentional_pooling(
    cfg: AttentionConfig,
    params: ParameterStore,
    Z: AxisTaggedTensor,
    prefixe: str = "enc/pool",
    requete: str = "sum",
) -> AxisTaggedTensor:
    """z (source × depth) : MHA sur TIME avec la requête Σ_t ẑ_t (ou la moyenne si requete='mean')."""
    temps = AxisRole.TIME.value
    if Z.etendue(temps) == 0:
        raise ErreurForme("attentional_pooling: T = 0", axe=temps)
    if requete == "sum":
        q = Z.somme([temps])
    elif requete == "mean":
        q = Z.moyenne([temps])
    else:
        raise ErreurConfiguration(f"Requête de pooling inconnue : {requete}")
    return multi_head_attention(cfg, params, q, Z, [temps], prefixe=prefixe)


def declarer_mha(params: ParameterStore, cfg: AttentionConfig, prefixe: str) -> None:
    dh = cfg.profondeur_tete
    for h in range(cfg.heads):
        params.declarer_dense(f"{prefixe}/head{h}/q", cfg.depth, dh)
        params.declarer_dense(f"{prefixe}/head{h}/v", cfg.depth, dh)
        if cfg.distinct_key_projection:
            params.declarer_dense(f"{prefixe}/head{h}/k", cfg.depth, dh)
    params.declarer_dense(f"{prefixe}/out", cfg.depth, cfg.depth)


def encodage_temporel(T: int, D: int) -> AxisTaggedTensor:
    """Encodage sinusoïdal classique (time × depth)."""
    position = torch.arange(T, dtype=DTYPE).unsqueeze(1)
    frequences = torch.exp(torch.arange(0, D, 2, dtype=DTYPE) * (-math.log(10000.0) / D))
    pe = torch.zeros(T, D, dtype=DTYPE)
    pe[:, 0::2] = torch.sin(position * frequences)
    pe[:, 1::2] = torch.cos(position * frequences[: D // 2])
    return AxisTaggedTensor(pe, (AxisRole.TIME.value, DEPTH))


def ajouter_encodage_temporel(Z: AxisTaggedTensor) -> AxisTaggedTensor:
    temps = AxisRole.TIME.value
    pe = encodage_temporel(Z.etendue(temps), Z.etendue(DEPTH))
    autres = [r for r in Z.axes if r not in (temps, DEPTH)]
    p = Z.permuter(autres + [temps, DEPTH])
    return AxisTaggedTensor(p.data + pe.data, p.axes).permuter(Z.axes)
