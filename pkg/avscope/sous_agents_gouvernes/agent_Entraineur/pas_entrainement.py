#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Pas d'entraînement MixIT (+ classifieur à l'écran en mode joint).

Le modèle est injecté ; il doit exposer :
    params                                  ParameterStore
    separer_lot(x)                          (B, T') → ŝ (B, M, T')
    mixit(ŝ, x₁, x₂)                        → (codes (B,), pertes minimales (B,))
    etiquettes(codes)                       → pseudo-étiquettes (B, M), 1 = vers x₁
    probabilites(ŝ, trames, training, g)    → ŷ (B, M)
    perte_classifieur(y, ŷ)                 → scalaire

Flux aléatoires d'un pas : indices du lot tirés de default_rng([graine, pas]),
dropout tiré d'un torch.Generator de graine (graine, pas). Un pas ne dépend donc
que de (graine, pas, paramètres, état Adam) : une reprise rejoue exactement la suite.
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from avscope.base.contrats_interface import ExempleAV, ModeEntrainement
from avscope.base.erreurs import ErreurDonnees, ErreurNumerique
from avscope.moteurs.moteur_tenseur import DTYPE, GradientTape, ParameterStore, backward

PREFIXE_SEPARATEUR = "sep/"


@dataclass(frozen=True)
class ReglagesEntrainement:
    learning_rate: float = 1e-4
    batch_size: int = 8
    weight_mixit: float = 1.0
    weight_classifier: float = 1.0
    checkpoint_every: int = 200
    classifier_grad_to_separator: bool = False
    graine: int = 0


@dataclass
class LotEntrainement:
    x1: torch.Tensor      # (B, T')
    x2: torch.Tensor      # (B, T')
    frames: torch.Tensor  # (B, T, H, W, C)

    @property
    def x(self) -> torch.Tensor:
        return self.x1 + self.x2


@dataclass
class PertesPas:
    mixit: torch.Tensor
    classifieur: Optional[torch.Tensor]
    totale: torch.Tensor

    def valeurs(self) -> Dict[str, float]:
        return {
            "mixit": float(self.mixit.detach()),
            "classifieur": float(self.classifieur.detach()) if self.classifieur is not None else float("nan"),
            "totale": float(self.totale.detach()),
        }

    def est_finie(self) -> bool:
        valeurs = [self.mixit, self.totale] + ([self.classifieur] if self.classifieur is not None else [])
        return all(math.isfinite(float(v.detach())) for v in valeurs)


def empiler_lot(exemples: Sequence[ExempleAV]) -> LotEntrainement:
    if not exemples:
        raise ErreurDonnees("empiler_lot: lot vide")
    sans_x2 = [e.identifiant for e in exemples if not e.mom.est_mom]
    if sans_x2:
        raise ErreurDonnees(f"empiler_lot: MixIT requiert des MoMs, x₂ absent pour {sans_x2[:3]}")
    return LotEntrainement(
        x1=torch.as_tensor(np.stack([e.mom.on_screen_mix.samples for e in exemples]), dtype=DTYPE),
        x2=torch.as_tensor(np.stack([e.mom.off_screen_mix.samples for e in exemples]), dtype=DTYPE),
        frames=torch.as_tensor(np.stack([e.mom.video.frames for e in exemples]), dtype=DTYPE),
    )


def tirer_indices(graine: int, pas: int, n: int, taille: int) -> np.ndarray:
    rng = np.random.default_rng([graine, pas])
    return rng.choice(n, size=taille, replace=n < taille)


def generateur_pas(graine: int, pas: int) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(graine * 1_000_003 + pas)
    return g


def parametres_entraines(params: ParameterStore, mode: ModeEntrainement) -> List[str]:
    """Pré-entraînement : séparateur seul. Joint : tout le store."""
    if ModeEntrainement(mode) == ModeEntrainement.PRETRAIN_SEPARATION:
        return params.noms(PREFIXE_SEPARATEUR)
    return params.noms()


def creer_optimiseur(params: ParameterStore, noms: Sequence[str], learning_rate: float) -> torch.optim.Adam:
    return torch.optim.Adam([params.brut(n) for n in noms], lr=learning_rate)


def calculer_pertes(modele, lot: LotEntrainement, mode: ModeEntrainement, reglages: ReglagesEntrainement,
                    generateur: Optional[torch.Generator] = None, training: bool = True) -> PertesPas:
    sources = modele.separer_lot(lot.x)
    codes, pertes_min = modele.mixit(sources, lot.x1, lot.x2)
    mixit = pertes_min.mean()
    totale = reglages.weight_mixit * mixit
    classifieur = None
    if ModeEntrainement(mode) == ModeEntrainement.JOINT:
        entree = sources if reglages.classifier_grad_to_separator else sources.detach()
        y_hat = modele.probabilites(entree, lot.frames, training, generateur)
        classifieur = modele.perte_classifieur(modele.etiquettes(codes), y_hat)
        totale = totale + reglages.weight_classifier * classifieur
    return PertesPas(mixit, classifieur, totale)


def train_step(modele, lot: LotEntrainement, optimiseur: torch.optim.Optimizer, noms: Sequence[str],
               mode: ModeEntrainement, reglages: ReglagesEntrainement, pas: int,
               generateur: Optional[torch.Generator] = None) -> PertesPas:
    """Un pas Adam. Une perte non finie lève ErreurNumerique AVANT toute mise à jour."""
    with GradientTape(modele.params) as tape:
        pertes = calculer_pertes(modele, lot, mode, reglages, generateur, training=True)
    if not pertes.est_finie():
        raise ErreurNumerique(f"Perte non finie au pas {pas} : {pertes.valeurs()}", pas=pas, pertes=pertes.valeurs())

    gradients = backward(tape, pertes.totale)
    for nom in noms:
        modele.params.brut(nom).grad = gradients[nom].clone()
    optimiseur.step()
    optimiseur.zero_grad(set_to_none=True)
    return pertes


# ========================================
# ÉTAT ADAM <-> CONTENEUR
# ========================================

def etat_optimiseur(optimiseur: torch.optim.Optimizer, noms: Sequence[str]) -> Dict[str, torch.Tensor]:
    etat = {}
    for nom, p in zip(noms, optimiseur.param_groups[0]["params"]):
        s = optimiseur.state.get(p)
        if not s:
            continue
        etat[f"{nom}/step"] = torch.as_tensor(float(s["step"]), dtype=DTYPE)
        etat[f"{nom}/exp_avg"] = s["exp_avg"].detach()
        etat[f"{nom}/exp_avg_sq"] = s["exp_avg_sq"].detach()
    return etat


def charger_etat_optimiseur(optimiseur: torch.optim.Optimizer, noms: Sequence[str],
                            etat: Dict[str, np.ndarray]) -> int:
    charges = 0
    for nom, p in zip(noms, optimiseur.param_groups[0]["params"]):
        if f"{nom}/step" not in etat:
            continue
        optimiseur.state[p] = {
            "step": torch.tensor(float(etat[f"{nom}/step"]), dtype=torch.float32),
            "exp_avg": torch.as_tensor(np.array(etat[f"{nom}/exp_avg"]), dtype=DTYPE),
            "exp_avg_sq": torch.as_tensor(np.array(etat[f"{nom}/exp_avg_sq"]), dtype=DTYPE),
        }
        charges += 1
    return charges
