#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ENCODEURS AUDIO-VISUELS
=======================
Les quatre encodeurs d'alignement (SA conjointe / séparable, CMA conjointe / séparable)
et la tête de classification à l'écran.

Conventions de nommage des paramètres :
    enc/layer{l}/<module>/head{h}/q|v|k, enc/layer{l}/<module>/out   (MHA)
    enc/layer{l}/<module>/ln1, ln2, f                                 (bloc)
    enc/pool/...                                                       (pooling)
    tete/f_z                                                           (classifieur)
Les branches audio et vidéo ne partagent aucun paramètre.

Tous les tenseurs peuvent porter un axe BATCH en plus de leurs axes de rôle.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
import torch

from avscope.base.contrats_interface import EncoderVariant
from avscope.base.erreurs import ErreurConfiguration, ErreurForme
from avscope.moteurs.moteur_attention import (
    AttentionConfig,
    ajouter_encodage_temporel,
    attentional_pooling,
    declarer_mha,
    etape_attention,
    multi_head_attention,
)
from avscope.moteurs.moteur_tenseur import (
    AxisRole,
    AxisTaggedTensor,
    ParameterStore,
    concat,
    dense,
    dropout,
    layer_norm,
)

SOURCE = AxisRole.SOURCE.value
SPACE = AxisRole.SPACE.value
TIME = AxisRole.TIME.value
DEPTH = AxisRole.DEPTH.value
JOINT = AxisRole.JOINT.value

PREFIXE_POOL = "enc/pool"
PREFIXE_TETE = "tete/f_z"


@dataclass(frozen=True)
class AVFeaturePair:
    """Z_A (source × time × depth) et Z_V (space × time × depth), T et D partagés."""
    audio: AxisTaggedTensor
    video: AxisTaggedTensor
    grid: Tuple[int, int] = (8, 8)

    def __post_init__(self):
        for role in (SOURCE, TIME, DEPTH):
            if not self.audio.a_axe(role):
                raise ErreurForme(f"AVFeaturePair: axe '{role}' absent de l'audio {self.audio.axes}", axe=role)
        for role in (SPACE, TIME, DEPTH):
            if not self.video.a_axe(role):
                raise ErreurForme(f"AVFeaturePair: axe '{role}' absent de la vidéo {self.video.axes}", axe=role)
        for role in (TIME, DEPTH):
            if self.audio.etendue(role) != self.video.etendue(role):
                raise ErreurForme(
                    f"AVFeaturePair: étendue '{role}' différente "
                    f"({self.audio.etendue(role)} vs {self.video.etendue(role)})",
                    axe=role,
                )
        if self.grid[0] * self.grid[1] != self.video.etendue(SPACE):
            raise ErreurForme(
                f"AVFeaturePair: G={self.video.etendue(SPACE)} ≠ {self.grid[0]}×{self.grid[1]}", axe=SPACE
            )

    @property
    def M(self) -> int:
        return self.audio.etendue(SOURCE)

    @property
    def G(self) -> int:
        return self.video.etendue(SPACE)

    @property
    def T(self) -> int:
        return self.audio.etendue(TIME)

    @property
    def D(self) -> int:
        return self.audio.etendue(DEPTH)


@dataclass(frozen=True)
class EncoderConfig:
    variant: EncoderVariant = EncoderVariant.SEP_SA
    blocks: int = 4
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    pooling_query: str = "sum"
    time_encoding: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", EncoderVariant(self.variant))
        if self.blocks < 1:
            raise ErreurConfiguration(f"EncoderConfig: L={self.blocks} doit être ≥ 1")
        if self.pooling_query not in ("sum", "mean"):
            raise ErreurConfiguration(f"EncoderConfig: requête de pooling inconnue ({self.pooling_query})")


# ========================================
# EMPAQUETAGE
# ========================================

def pack_av(pair: AVFeaturePair) -> AxisTaggedTensor:
    """Z_AV : les M premières lignes de JOINT sont l'audio, les G suivantes la vidéo."""
    audio = pair.audio.renommer({SOURCE: JOINT})
    video = pair.video.renommer({SPACE: JOINT})
    return concat([audio, video.permuter(audio.axes)], JOINT)


def _separer(Z: AxisTaggedTensor, M: int) -> Tuple[AxisTaggedTensor, AxisTaggedTensor]:
    G = Z.etendue(JOINT) - M
    audio = Z.tranche(JOINT, 0, M).renommer({JOINT: SOURCE})
    video = Z.tranche(JOINT, M, M + G).renommer({JOINT: SPACE})
    return audio, video


# ========================================
# BLOCS
# ========================================

def sa_block(
    cfg: AttentionConfig,
    params: ParameterStore,
    prefixe: str,
    Z: AxisTaggedTensor,
    axes,
    training: bool = False,
    generateur: Optional[torch.Generator] = None,
) -> AxisTaggedTensor:
    """r = LN1(MHA(Z,Z) + Z) ; Z' = LN2(f(Dropout(r))) + r."""
    with etape_attention():
        a = multi_head_attention(cfg, params, Z, Z, axes, prefixe=prefixe)
    r = layer_norm(params, f"{prefixe}/ln1", a + Z)
    h = dense(params, f"{prefixe}/f", dropout(r, cfg.dropout, generateur, training), cfg.depth)
    return layer_norm(params, f"{prefixe}/ln2", h) + r


def cma_block(
    cfg: AttentionConfig,
    params: ParameterStore,
    prefixe: str,
    A: AxisTaggedTensor,
    V: AxisTaggedTensor,
    axes_video=(SPACE, TIME),
    axes_audio=(SOURCE, TIME),
    training: bool = False,
    generateur: Optional[torch.Generator] = None,
) -> Tuple[AxisTaggedTensor, AxisTaggedTensor]:
    """
    a₁ = MHA(A, V) sur axes_video ; a₂ = LN(a₁ + A) ; a₃ = f(Dropout(a₂)) ; A' = LN(a₃ + A)
    et symétriquement pour la vidéo. Les deux résidus partent des entrées du bloc.
    """
    with etape_attention():
        a1 = multi_head_attention(cfg, params, A, V, axes_video, prefixe=f"{prefixe}/audio")
        v1 = multi_head_attention(cfg, params, V, A, axes_audio, prefixe=f"{prefixe}/video")

    def _branche(x1, entree, nom):
        x2 = layer_norm(params, f"{prefixe}/{nom}/ln1", x1 + entree)
        x3 = dense(params, f"{prefixe}/{nom}/f", dropout(x2, cfg.dropout, generateur, training), cfg.depth)
        return layer_norm(params, f"{prefixe}/{nom}/ln2", x3 + entree)

    return _branche(a1, A, "audio"), _branche(v1, V, "video")


# ========================================
# ENCODEURS
# ========================================

def _preparer(cfg: EncoderConfig, pair: AVFeaturePair) -> AVFeaturePair:
    if not cfg.time_encoding:
        return pair
    return AVFeaturePair(ajouter_encodage_temporel(pair.audio), ajouter_encodage_temporel(pair.video), pair.grid)


def _verifier_variante(cfg: EncoderConfig, attendue: EncoderVariant) -> None:
    if cfg.variant != attendue:
        raise ErreurConfiguration(f"Encodeur {attendue.value} appelé avec la variante {cfg.variant.value}")


def _pool(cfg: EncoderConfig, params: ParameterStore, Z_audio: AxisTaggedTensor) -> AxisTaggedTensor:
    return attentional_pooling(cfg.attention, params, Z_audio, prefixe=PREFIXE_POOL, requete=cfg.pooling_query)


def joint_sa_encode(cfg: EncoderConfig, params: ParameterStore, pair: AVFeaturePair,
                    training: bool = False, generateur: Optional[torch.Generator] = None) -> AxisTaggedTensor:
    _verifier_variante(cfg, EncoderVariant.JOINT_SA)
    pair = _preparer(cfg, pair)
    Z = pack_av(pair)
    for l in range(cfg.blocks):
        Z = sa_block(cfg.attention, params, f"enc/layer{l}/sa", Z, (JOINT, TIME), training, generateur)
    audio, _ = _separer(Z, pair.M)
    return _pool(cfg, params, audio)


def separable_sa_encode(cfg: EncoderConfig, params: ParameterStore, pair: AVFeaturePair,
                        training: bool = False, generateur: Optional[torch.Generator] = None) -> AxisTaggedTensor:
    _verifier_variante(cfg, EncoderVariant.SEP_SA)
    pair = _preparer(cfg, pair)
    Z = pack_av(pair)
    for l in range(cfg.blocks):
        audio, video = _separer(Z, pair.M)
        with etape_attention():
            audio = sa_block(cfg.attention, params, f"enc/layer{l}/sa_temps_audio", audio, (TIME,), training, generateur)
            video = sa_block(cfg.attention, params, f"enc/layer{l}/sa_temps_video", video, (TIME,), training, generateur)
        Z = pack_av(AVFeaturePair(audio, video, pair.grid))
        Z = sa_block(cfg.attention, params, f"enc/layer{l}/sa_joint", Z, (JOINT,), training, generateur)
    audio, _ = _separer(Z, pair.M)
    return _pool(cfg, params, audio)


def joint_cma_encode(cfg: EncoderConfig, params: ParameterStore, pair: AVFeaturePair,
                     training: bool = False, generateur: Optional[torch.Generator] = None) -> AxisTaggedTensor:
    _verifier_variante(cfg, EncoderVariant.JOINT_CMA)
    pair = _preparer(cfg, pair)
    A, V = pair.audio, pair.video
    for l in range(cfg.blocks):
        A, V = cma_block(cfg.attention, params, f"enc/layer{l}/cma", A, V,
                         (SPACE, TIME), (SOURCE, TIME), training, generateur)
    return _pool(cfg, params, A)


def separable_cma_encode(cfg: EncoderConfig, params: ParameterStore, pair: AVFeaturePair,
                         training: bool = False, generateur: Optional[torch.Generator] = None) -> AxisTaggedTensor:
    _verifier_variante(cfg, EncoderVariant.SEP_CMA)
    pair = _preparer(cfg, pair)
    A, V = pair.audio, pair.video
    for l in range(cfg.blocks):
        with etape_attention():
            A = sa_block(cfg.attention, params, f"enc/layer{l}/sa_temps_audio", A, (TIME,), training, generateur)
            V = sa_block(cfg.attention, params, f"enc/layer{l}/sa_temps_video", V, (TIME,), training, generateur)
        A, V = cma_block(cfg.attention, params, f"enc/layer{l}/cma", A, V,
                         (SPACE,), (SOURCE,), training, generateur)
    return _pool(cfg, params, A)


ENCODEURS = {
    EncoderVariant.JOINT_SA: joint_sa_encode,
    EncoderVariant.SEP_SA: separable_sa_encode,
    EncoderVariant.JOINT_CMA: joint_cma_encode,
    EncoderVariant.SEP_CMA: separable_cma_encode,
}


def encode(cfg: EncoderConfig, params: ParameterStore, pair: AVFeaturePair,
           training: bool = False, generateur: Optional[torch.Generator] = None) -> AxisTaggedTensor:
    return ENCODEURS[cfg.variant](cfg, params, pair, training, generateur)


# ========================================
# TÊTE À L'ÉCRAN
# ========================================

def onscreen_head(params: ParameterStore, z: AxisTaggedTensor) -> AxisTaggedTensor:
    """ŷ_m = σ(f_z(z)_m) ; l'axe DEPTH disparaît."""
    logits = dense(params, PREFIXE_TETE, z, 1)
    i = logits.indice(DEPTH)
    return AxisTaggedTensor(torch.sigmoid(logits.data.squeeze(i)), tuple(r for r in logits.axes if r != DEPTH))


def onscreen_estimate(y_hat: Union[np.ndarray, torch.Tensor], sources: Union[np.ndarray, torch.Tensor]):
    """x̂ᵒⁿ = Σ_m ŷ_m ŝ_m (dernier axe de ŷ = sources, ŝ en (..., M, T'))."""
    if y_hat.shape[-1] != sources.shape[-2]:
        raise ErreurForme(f"onscreen_estimate: {y_hat.shape[-1]} probabilités pour {sources.shape[-2]} sources", axe=SOURCE)
    if isinstance(y_hat, torch.Tensor) or isinstance(sources, torch.Tensor):
        return torch.einsum("...m,...mt->...t", torch.as_tensor(y_hat), torch.as_tensor(sources))
    return np.einsum("...m,...mt->...t", np.asarray(y_hat, dtype=np.float64), np.asarray(sources, dtype=np.float64))


# ========================================
# DÉCLARATION DES PARAMÈTRES
# ========================================

def _declarer_sa(params: ParameterStore, cfg: AttentionConfig, prefixe: str) -> None:
    declarer_mha(params, cfg, prefixe)
    params.declarer_norme(f"{prefixe}/ln1", cfg.depth)
    params.declarer_dense(f"{prefixe}/f", cfg.depth, cfg.depth)
    params.declarer_norme(f"{prefixe}/ln2", cfg.depth)


def _declarer_cma(params: ParameterStore, cfg: AttentionConfig, prefixe: str) -> None:
    for branche in ("audio", "video"):
        _declarer_sa(params, cfg, f"{prefixe}/{branche}")


def declarer_encodeur(params: ParameterStore, cfg: EncoderConfig) -> None:
    att = cfg.attention
    for l in range(cfg.blocks):
        if cfg.variant == EncoderVariant.JOINT_SA:
            _declarer_sa(params, att, f"enc/layer{l}/sa")
        elif cfg.variant == EncoderVariant.SEP_SA:
            _declarer_sa(params, att, f"enc/layer{l}/sa_temps_audio")
            _declarer_sa(params, att, f"enc/layer{l}/sa_temps_video")
            _declarer_sa(params, att, f"enc/layer{l}/sa_joint")
        elif cfg.variant == EncoderVariant.JOINT_CMA:
            _declarer_cma(params, att, f"enc/layer{l}/cma")
        else:
            _declarer_sa(params, att, f"enc/layer{l}/sa_temps_audio")
            _declarer_sa(params, att, f"enc/layer{l}/sa_temps_video")
            _declarer_cma(params, att, f"enc/layer{l}/cma")
    declarer_mha(params, att, PREFIXE_POOL)
    params.declarer_dense(PREFIXE_TETE, att.depth, 1)


# ========================================
# COMPLEXITÉ (formes fermées)
# ========================================

def pic_attendu(variant: EncoderVariant, M: int, G: int, T: int, H: int) -> dict:
    """
    Pics analytiques des tenseurs α (pooling compris) :
    - etape : somme des α vivants dans une même étape ;
    - tenseur : plus grand α isolé.
    """
    variant = EncoderVariant(variant)
    pooling = M * T * H
    if variant == EncoderVariant.JOINT_SA:
        etape = tenseur = T * T * (M + G) ** 2 * H
    elif variant == EncoderVariant.SEP_SA:
        etape = max((M + G) * T * T * H, T * (M + G) ** 2 * H)
        tenseur = max(M * T * T * H, G * T * T * H, T * (M + G) ** 2 * H)
    elif variant == EncoderVariant.JOINT_CMA:
        tenseur = M * G * T * T * H
        etape = 2 * tenseur
    else:
        tenseur = max(M * T * T * H, G * T * T * H, M * G * T * H)
        etape = max((M + G) * T * T * H, 2 * M * G * T * H)
    return {"etape": max(etape, pooling), "tenseur": max(tenseur, pooling)}
