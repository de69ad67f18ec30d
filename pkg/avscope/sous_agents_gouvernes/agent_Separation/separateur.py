#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Séparateur à masques (version réduite d'un empilement convolutif dilaté).

    e = ReLU(conv1d(x, base d'analyse))                 N filtres, noyau K, pas K/2, sans biais
    h = e ; h ← h + ReLU(conv_dilatée_d(h))            d ∈ dilatations
    m = σ(conv1x1(h)) → M masques de N canaux
    ŝ_m = conv_transpose1d(m_m ⊙ e, base de synthèse)  sans biais
    ŝ ← mixture_consistency(ŝ, x)

Le chemin de masquage est linéaire en e : une entrée nulle donne des sources nulles.
Paramètres : sep/analyse, sep/bloc{i}, sep/masques, sep/synthese.
"""
from dataclasses import dataclass
from typing import Tuple

import torch
import torch.nn.functional as F

from avscope.base.erreurs import ErreurConfiguration, ErreurDonnees, ErreurForme
from avscope.moteurs.moteur_tenseur import DTYPE, ParameterStore

PREFIXE = "sep"


@dataclass(frozen=True)
class SeparateurConfig:
    M: int = 4
    n_filters: int = 64
    kernel: int = 16
    dilations: Tuple[int, ...] = (1, 2, 4, 8)
    longueur: int = 8000

    def __post_init__(self):
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        if self.M < 1 or self.n_filters < 1 or self.longueur < 1:
            raise ErreurConfiguration(f"SeparateurConfig: M, n_filters et longueur doivent être positifs ({self})")
        if self.kernel < 2 or self.kernel % 2:
            raise ErreurConfiguration(f"SeparateurConfig: noyau pair ≥ 2 attendu (reçu {self.kernel})")
        if any(d < 1 for d in self.dilations):
            raise ErreurConfiguration(f"SeparateurConfig: dilatations invalides {self.dilations}")

    @property
    def pas(self) -> int:
        return self.kernel // 2


def declarer_separateur(params: ParameterStore, cfg: SeparateurConfig) -> None:
    N, K = cfg.n_filters, cfg.kernel
    params.declarer(f"{PREFIXE}/analyse/w", (N, 1, K), fan_in=K)
    for i, _ in enumerate(cfg.dilations):
        params.declarer(f"{PREFIXE}/bloc{i}/w", (N, N, 3), fan_in=3 * N)
        params.declarer(f"{PREFIXE}/bloc{i}/b", (N,), init="zeros")
    params.declarer(f"{PREFIXE}/masques/w", (cfg.M * N, N, 1), fan_in=N)
    params.declarer(f"{PREFIXE}/masques/b", (cfg.M * N,), init="zeros")
    params.declarer(f"{PREFIXE}/synthese/w", (N, 1, K), fan_in=N)


def mixture_consistency(sources, x):
    """ŝ'_m = ŝ_m + (x − Σ_k ŝ_k)/M ; ŝ en (..., M, T'), x en (..., T'). numpy ou torch."""
    M = sources.shape[-2]
    if M == 0:
        raise ErreurDonnees("mixture_consistency: aucune source (M = 0)")
    if sources.shape[-1] != x.shape[-1]:
        raise ErreurForme(
            f"mixture_consistency: longueurs différentes ({sources.shape[-1]} vs {x.shape[-1]})", axe="time"
        )
    residu = x - sources.sum(-2)
    return sources + residu[..., None, :] / M


def _bornes_remplissage(cfg: SeparateurConfig, longueur: int) -> Tuple[int, int]:
    gauche = cfg.kernel - cfg.pas
    total = longueur + 2 * gauche
    droite = gauche + (-(total - cfg.kernel)) % cfg.pas
    return gauche, droite


def separate(params: ParameterStore, x: torch.Tensor, cfg: SeparateurConfig) -> torch.Tensor:
    """x : (T') ou (B, T') → ŝ : (M, T') ou (B, M, T'), cohérent avec x."""
    x = torch.as_tensor(x, dtype=DTYPE)
    seul = x.dim() == 1
    if seul:
        x = x.unsqueeze(0)
    if x.shape[-1] != cfg.longueur:
        raise ErreurForme(f"separate: longueur {x.shape[-1]} au lieu de {cfg.longueur}", axe="time")

    B, longueur = x.shape
    gauche, droite = _bornes_remplissage(cfg, longueur)
    entree = F.pad(x.unsqueeze(1), (gauche, droite))

    e = F.relu(F.conv1d(entree, params.brut(f"{PREFIXE}/analyse/w"), stride=cfg.pas))
    h = e
    for i, d in enumerate(cfg.dilations):
        h = h + F.relu(F.conv1d(h, params.brut(f"{PREFIXE}/bloc{i}/w"), params.brut(f"{PREFIXE}/bloc{i}/b"),
                                dilation=d, padding=d))
    masques = torch.sigmoid(F.conv1d(h, params.brut(f"{PREFIXE}/masques/w"), params.brut(f"{PREFIXE}/masques/b")))
    masques = masques.view(B, cfg.M, cfg.n_filters, -1)

    masque_e = (masques * e.unsqueeze(1)).reshape(B * cfg.M, cfg.n_filters, -1)
    sorties = F.conv_transpose1d(masque_e, params.brut(f"{PREFIXE}/synthese/w"), stride=cfg.pas)
    sources = sorties.view(B, cfg.M, -1)[..., gauche:gauche + longueur]

    sources = mixture_consistency(sources, x)
    return sources[0] if seul else sources
