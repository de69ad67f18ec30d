#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
MixIT : assignation des M sources estimées aux deux mélanges d'une MoM,
pseudo-étiquettes et pertes d'entraînement.

Encodage des assignations : code c ∈ [0, 2^M), bit m de c = 1 si la source m va au
second mélange x₂ (ligne 1 de A), sinon au mélange à l'écran x₁ (ligne 0).
En cas d'égalité, l'argmin retient le plus petit code.
"""
import math
from typing import List, Tuple, Union

import numpy as np
import torch

from avscope.base.contrats_interface import AssignmentMatrix, Waveform
from avscope.base.erreurs import ErreurDonnees, ErreurForme
from avscope.moteurs.moteur_tenseur import DTYPE

M_MAX = 8
TAU_DB = 30.0
CLIP_PROBA = 1e-7

Signal = Union[Waveform, np.ndarray, torch.Tensor]


def _tenseur(x: Signal) -> torch.Tensor:
    if isinstance(x, Waveform):
        x = x.samples
    return torch.as_tensor(x, dtype=DTYPE)


def enumerate_assignments(M: int) -> List[AssignmentMatrix]:
    if M < 1:
        raise ErreurDonnees(f"enumerate_assignments: M={M} doit être ≥ 1")
    if M > M_MAX:
        raise ErreurDonnees(
            f"enumerate_assignments: M={M} > {M_MAX}, 2^M assignations deviendraient ingérables"
        )
    assignations = []
    for code in range(2 ** M):
        ligne_x2 = [(code >> m) & 1 for m in range(M)]
        assignations.append(AssignmentMatrix(np.array([[1 - b for b in ligne_x2], ligne_x2])))
    return assignations


def _table_assignations(M: int) -> torch.Tensor:
    """(2^M, M) : 1 si la source va à x₂."""
    return torch.tensor([[(c >> m) & 1 for m in range(M)] for c in range(2 ** M)], dtype=DTYPE)


def negative_snr_loss(ref: Signal, est: Signal, tau_db: float = TAU_DB) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    −10·log₁₀(‖r‖² / (‖r−e‖² + 10^{−τ/10}·‖r‖²)) sur le dernier axe.
    Référence nulle : perte 0 et drapeau levé.
    Renvoie (perte, drapeau_ref_nulle), de forme égale aux axes de tête.
    """
    r, e = _tenseur(ref), _tenseur(est)
    if r.shape[-1] != e.shape[-1]:
        raise ErreurForme(f"negative_snr_loss: longueurs différentes ({r.shape[-1]} vs {e.shape[-1]})", axe="time")
    r, e = torch.broadcast_tensors(r, e)
    puissance_ref = (r ** 2).sum(-1)
    nulle = puissance_ref == 0
    puissance_sure = torch.where(nulle, torch.ones_like(puissance_ref), puissance_ref)
    seuil = 10.0 ** (-tau_db / 10.0)
    valeur = 10.0 * torch.log10(((r - e) ** 2).sum(-1) + seuil * puissance_sure) - 10.0 * torch.log10(puissance_sure)
    return torch.where(nulle, torch.zeros_like(valeur), valeur), nulle


def mixit_losses(sources: torch.Tensor, x1: torch.Tensor, x2: torch.Tensor, tau_db: float = TAU_DB) -> torch.Tensor:
    """Pertes de toutes les assignations : ŝ (..., M, T'), x₁/x₂ (..., T') → (..., 2^M)."""
    M = sources.shape[-2]
    if M > M_MAX:
        raise ErreurDonnees(f"mixit: M={M} > {M_MAX}")
    vers_x2 = _table_assignations(M)
    est2 = torch.einsum("cm,...mt->...ct", vers_x2, sources)
    est1 = torch.einsum("cm,...mt->...ct", 1.0 - vers_x2, sources)
    perte1, _ = negative_snr_loss(x1.unsqueeze(-2), est1, tau_db)
    perte2, _ = negative_snr_loss(x2.unsqueeze(-2), est2, tau_db)
    return perte1 + perte2


def mixit_best_assignment(sources: Signal, x1: Signal, x2: Signal, tau_db: float = TAU_DB) -> Tuple[AssignmentMatrix, float]:
    """argmin sur les 2^M assignations de perte(x₁, (Aŝ)₁) + perte(x₂, (Aŝ)₂)."""
    s = _tenseur(sources)
    if s.dim() != 2:
        raise ErreurForme(f"mixit_best_assignment: ŝ attendu en (M, T'), reçu {tuple(s.shape)}", axe="source")
    with torch.no_grad():
        pertes = mixit_losses(s, _tenseur(x1), _tenseur(x2), tau_db)
    code = int(torch.argmin(pertes))
    return enumerate_assignments(s.shape[0])[code], float(pertes[code])


def mixit_lot(sources: torch.Tensor, x1: torch.Tensor, x2: torch.Tensor,
              tau_db: float = TAU_DB) -> Tuple[torch.Tensor, torch.Tensor]:
    """Version par lot, différentiable : (codes (B,), pertes minimales (B,))."""
    pertes = mixit_losses(sources, x1, x2, tau_db)
    codes = torch.argmin(pertes.detach(), dim=-1)
    return codes, pertes.gather(-1, codes.unsqueeze(-1)).squeeze(-1)


def codes_vers_etiquettes(codes: torch.Tensor, M: int) -> torch.Tensor:
    """Pseudo-étiquettes par lot : 1 si la source va au mélange à l'écran x₁."""
    bits = (codes.unsqueeze(-1) >> torch.arange(M)) & 1
    return (1 - bits).to(DTYPE)


def pseudo_labels(assignation: AssignmentMatrix, ligne_sur_ecran: int = 0) -> np.ndarray:
    """y_m = A*[ligne du mélange à l'écran, m]."""
    return assignation.matrice[ligne_sur_ecran].astype(np.int64)


def classifier_loss(y, y_hat) -> torch.Tensor:
    """Entropie croisée binaire moyenne, ŷ bornée dans [1e-7, 1−1e-7]."""
    y = torch.as_tensor(y, dtype=DTYPE)
    y_hat = torch.as_tensor(y_hat, dtype=DTYPE)
    if y.shape != y_hat.shape:
        raise ErreurForme(f"classifier_loss: formes {tuple(y.shape)} et {tuple(y_hat.shape)}", axe="source")
    p = y_hat.clamp(CLIP_PROBA, 1.0 - CLIP_PROBA)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p)).mean()


def perte_snr_valeur(ref: Signal, est: Signal, tau_db: float = TAU_DB) -> Tuple[float, bool]:
    """Variante scalaire pour un seul couple (journalisation, tests)."""
    valeur, nulle = negative_snr_loss(ref, est, tau_db)
    valeur = float(valeur)
    if math.isnan(valeur):
        raise ErreurDonnees("negative_snr_loss: valeur NaN")
    return valeur, bool(nulle)
