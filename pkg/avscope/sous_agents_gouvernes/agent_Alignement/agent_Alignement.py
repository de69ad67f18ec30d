#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AgentAlignement - Décision audio-visuelle "à l'écran"
======================================================
Reçoit les caractéristiques (Z_A, Z_V) des sources séparées et de la vidéo,
les encode avec la variante configurée puis produit ŷ et x̂ᵒⁿ (OnScreenDecision).

Une CalibrationMap optionnelle est appliquée à ŷ avant la pondération des sources.
"""
from typing import Optional

import numpy as np
import torch

from avscope.base.META_agent import AgentBase
from avscope.base.contrats_interface import CalibrationMap, OnScreenDecision, SourceEstimates
from avscope.moteurs.moteur_tenseur import ParameterStore
from avscope.sous_agents_gouvernes.agent_Alignement.encodeurs_av import (
    AVFeaturePair,
    EncoderConfig,
    encode,
    onscreen_estimate,
    onscreen_head,
)


class AgentAlignement(AgentBase):
    def __init__(self, cfg: EncoderConfig, params: ParameterStore):
        super().__init__(nom_agent="AgentAlignement")
        self.cfg = cfg
        self.params = params
        self.stats_manager.definir_stat_specifique("variante", cfg.variant.value)
        self.logger.info(f"✅ AgentAlignement prêt (variante {cfg.variant.value}, L={cfg.blocks}).")

    def probabilites(self, pair: AVFeaturePair, training: bool = False,
                     generateur: Optional[torch.Generator] = None) -> torch.Tensor:
        """ŷ brut (tenseur torch, différentiable) : (M,) ou (B, M) si la paire porte un axe batch."""
        z = encode(self.cfg, self.params, pair, training, generateur)
        y = onscreen_head(self.params, z)
        if y.a_axe("batch"):
            y = y.permuter(["batch", "source"])
        return y.data

    def decider(self, pair: AVFeaturePair, estimations: SourceEstimates,
                carte: Optional[CalibrationMap] = None) -> OnScreenDecision:
        with torch.no_grad():
            y_hat = self.probabilites(pair).detach().cpu().numpy()
        if carte is not None:
            y_hat = carte.appliquer(y_hat)
        y_hat = np.clip(y_hat, 0.0, 1.0)
        self.stats_manager.incrementer_stat_specifique("decisions")
        decision = OnScreenDecision(
            probabilities=y_hat,
            on_screen_waveform=onscreen_estimate(y_hat, estimations.sources),
        )
        return self.valider_sortie(decision)
