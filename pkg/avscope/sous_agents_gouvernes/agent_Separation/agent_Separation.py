#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AgentSeparation - Séparation en M sources + assignation MixIT
=============================================================
Enveloppe le séparateur à masques (separateur.py) et l'oracle MixIT (mixit.py)
pour l'inférence : les sources sortent toujours cohérentes avec le mélange d'entrée.
"""
from typing import Tuple

import numpy as np
import torch

from avscope.base.META_agent import AgentBase
from avscope.base.contrats_interface import AssignmentMatrix, MixtureOfMixtures, SourceEstimates, Waveform
from avscope.base.erreurs import ErreurDonnees
from avscope.moteurs.moteur_tenseur import ParameterStore
from avscope.sous_agents_gouvernes.agent_Separation.mixit import TAU_DB, mixit_best_assignment
from avscope.sous_agents_gouvernes.agent_Separation.separateur import SeparateurConfig, separate


class AgentSeparation(AgentBase):
    def __init__(self, cfg: SeparateurConfig, params: ParameterStore, tau_db: float = TAU_DB):
        super().__init__(nom_agent="AgentSeparation")
        self.cfg = cfg
        self.params = params
        self.tau_db = tau_db
        self.logger.info(f"✅ AgentSeparation prêt (M={cfg.M}, {cfg.n_filters} filtres, T'={cfg.longueur}).")

    def separer(self, x: Waveform) -> SourceEstimates:
        with torch.no_grad():
            sources = separate(self.params, torch.as_tensor(x.samples), self.cfg)
        self.stats_manager.incrementer_stat_specifique("separations")
        return self.valider_sortie(SourceEstimates(sources.numpy(), x.sample_rate))

    def assigner(self, estimations: SourceEstimates, mom: MixtureOfMixtures) -> Tuple[AssignmentMatrix, float]:
        """Meilleure assignation MixIT de ŝ vers (x₁, x₂) ; exige une MoM."""
        if not mom.est_mom:
            raise ErreurDonnees("assigner: MixIT requiert une MoM (x₂ absent)")
        assignation, perte = mixit_best_assignment(
            estimations.sources, mom.on_screen_mix.samples, mom.off_screen_mix.samples, self.tau_db
        )
        self.stats_manager.incrementer_stat_specifique("assignations_mixit")
        if not np.isfinite(perte):
            self.logger.log_warning(f"⚠️ Perte MixIT non finie ({perte})")
        return self.valider_sortie((assignation, perte))
