#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ModeleAV - Assemblage séparateur + caractéristiques + encodeur audio-visuel
===========================================================================
Un seul ParameterStore porte les deux familles de paramètres :
    sep/...          séparateur à masques (pré-entraînable seul)
    enc/..., tete/... encodeur audio-visuel et tête f_z
Les caractéristiques (AgentPerception) n'ont aucun paramètre.

Le modèle est injecté tel quel dans AgentEntraineur, AgentCalibration et AgentEvaluation,
qui n'en connaissent que les méthodes publiques.
"""
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import torch

from avscope.base.contrats_interface import (
    AssignmentMatrix,
    CalibrationMap,
    ExempleAV,
    MixtureOfMixtures,
    OnScreenDecision,
    SourceEstimates,
)
from avscope.base.erreurs import ErreurParametre
from avscope.moteurs.conteneur_avsc import ecrire_checkpoint, lire_checkpoint
from avscope.moteurs.moteur_attention import AttentionConfig
from avscope.moteurs.moteur_tenseur import DTYPE, ParameterStore
from avscope.sous_agents_gouvernes.agent_Alignement.agent_Alignement import AgentAlignement
from avscope.sous_agents_gouvernes.agent_Alignement.encodeurs_av import AVFeaturePair, EncoderConfig, declarer_encodeur
from avscope.sous_agents_gouvernes.agent_Experience.config_experience import ExperimentConfig
from avscope.sous_agents_gouvernes.agent_Perception.agent_Perception import AgentPerception
from avscope.sous_agents_gouvernes.agent_Perception.caracteristiques import FeatureConfig
from avscope.sous_agents_gouvernes.agent_Perception.synthese_av import SyntheseConfig
from avscope.sous_agents_gouvernes.agent_Separation.agent_Separation import AgentSeparation
from avscope.sous_agents_gouvernes.agent_Separation.mixit import (
    classifier_loss,
    codes_vers_etiquettes,
    mixit_lot,
    pseudo_labels,
)
from avscope.sous_agents_gouvernes.agent_Separation.separateur import PREFIXE, SeparateurConfig, declarer_separateur, separate


def configs_depuis(cfg: ExperimentConfig) -> Tuple[SeparateurConfig, EncoderConfig, SyntheseConfig, FeatureConfig]:
    d, m = cfg.donnees, cfg.modele
    separateur = SeparateurConfig(M=m.M, n_filters=m.n_filters, kernel=m.kernel,
                                  dilations=tuple(m.dilations), longueur=cfg.longueur)
    encodeur = EncoderConfig(
        variant=m.variant,
        blocks=m.L,
        attention=AttentionConfig(depth=m.D, heads=m.H, dropout=m.dropout,
                                  distinct_key_projection=m.distinct_key_projection),
        pooling_query=m.pooling_query,
        time_encoding=m.time_encoding,
    )
    synthese = SyntheseConfig(
        sample_rate=d.sample_rate, clip_seconds=d.clip_seconds, fps=d.fps, grid_h=d.grid_h, grid_w=d.grid_w,
        patch=d.patch, channels=d.channels, max_onscreen_sources=d.max_onscreen_sources,
        max_offscreen_sources=d.max_offscreen_sources, correlation=d.correlation,
    )
    features = FeatureConfig(D=m.D, T=cfg.T, sample_rate=d.sample_rate, n_mels=m.n_mels,
                             grid=(d.grid_h, d.grid_w), graine=cfg.seed)
    return separateur, encodeur, synthese, features


class ModeleAV:
    def __init__(self, cfg: ExperimentConfig, params: Optional[ParameterStore] = None):
        self.cfg = cfg
        self.cfg_separateur, self.cfg_encodeur, self.cfg_synthese, self.cfg_features = configs_depuis(cfg)
        if params is None:
            params = ParameterStore(cfg.seed)
            declarer_separateur(params, self.cfg_separateur)
            declarer_encodeur(params, self.cfg_encodeur)
        self.params = params
        self.separation = AgentSeparation(self.cfg_separateur, params, cfg.modele.tau_db)
        self.alignement = AgentAlignement(self.cfg_encodeur, params)
        self.perception = AgentPerception(self.cfg_synthese, self.cfg_features)

    @property
    def M(self) -> int:
        return self.cfg_separateur.M

    @property
    def grille(self) -> Tuple[int, int]:
        return self.cfg_features.grid

    # --- Passes avant différentiables (entraînement) ---
    def separer_lot(self, x: torch.Tensor) -> torch.Tensor:
        """(B, T') → ŝ (B, M, T'), cohérentes avec x."""
        return separate(self.params, x, self.cfg_separateur)

    def paire(self, sources, frames) -> AVFeaturePair:
        Z_A, Z_V = self.perception.caracteristiques(sources, frames)
        return AVFeaturePair(Z_A, Z_V, self.grille)

    def probabilites(self, sources, frames, training: bool = False,
                     generateur: Optional[torch.Generator] = None) -> torch.Tensor:
        return self.alignement.probabilites(self.paire(sources, frames), training, generateur)

    def mixit(self, sources: torch.Tensor, x1: torch.Tensor, x2: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return mixit_lot(sources, x1, x2, self.cfg.modele.tau_db)

    def etiquettes(self, codes: torch.Tensor) -> torch.Tensor:
        return codes_vers_etiquettes(codes, self.M)

    @staticmethod
    def perte_classifieur(y, y_hat) -> torch.Tensor:
        return classifier_loss(y, y_hat)

    # --- Inférence ---
    def inferer(self, exemple: ExempleAV, carte: Optional[CalibrationMap] = None) -> Tuple[SourceEstimates, OnScreenDecision]:
        """Sépare l'entrée (x₁ ou x₁ + x₂) puis décide à l'écran, sans gradient."""
        estimations = self.separation.separer(exemple.mom.entree)
        with torch.no_grad():
            pair = self.paire(torch.as_tensor(estimations.sources, dtype=DTYPE), exemple.mom.video.frames)
        decision = self.alignement.decider(pair, estimations, carte)
        return estimations, decision

    def assignation_mixit(self, estimations: SourceEstimates, mom: MixtureOfMixtures) -> AssignmentMatrix:
        assignation, _ = self.separation.assigner(estimations, mom)
        return assignation

    def etiquettes_mixit(self, estimations: SourceEstimates, mom: MixtureOfMixtures) -> np.ndarray:
        """Pseudo-étiquettes : ligne x₁ de la meilleure assignation MixIT."""
        return pseudo_labels(self.assignation_mixit(estimations, mom), ligne_sur_ecran=0)

    # --- Persistance ---
    def sauvegarder(self, chemin: Union[str, Path], etat_optim: Optional[Dict[str, torch.Tensor]] = None,
                    pas: int = 0) -> Path:
        return ecrire_checkpoint(chemin, self.params.valeurs(), etat_optim, pas)

    def charger(self, chemin: Union[str, Path], prefixe: str = "") -> Tuple[Dict[str, np.ndarray], int]:
        """Charge les poids (tous, ou seulement ceux du préfixe) ; renvoie (état optimiseur, pas)."""
        poids, etat, pas = lire_checkpoint(chemin)
        if not poids:
            raise ErreurParametre(f"Checkpoint sans poids : {chemin}")
        self.params.charger_valeurs(poids, prefixe=prefixe, strict=True)
        return etat, pas

    def charger_separateur(self, chemin: Union[str, Path]) -> int:
        """Pré-entraînement : seuls les poids sep/ sont repris."""
        self.charger(chemin, prefixe=f"{PREFIXE}/")
        return len(self.params.noms(f"{PREFIXE}/"))
