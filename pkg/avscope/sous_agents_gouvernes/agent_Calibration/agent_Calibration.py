#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AgentCalibration - Calibration post-entraînement de ŷ
=====================================================
1. Passe le modèle (injecté) sur des exemples de validation étiquetés.
2. Construit les CalibrationExample selon etiquettes_sur_ecran.
3. Ajuste une carte isotonique unique, partagée par toutes les sources.
"""
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from avscope.base.META_agent import AgentBase
from avscope.base.contrats_interface import (
    CalibrationExample,
    CalibrationMap,
    ExempleAV,
    TypeClip,
    etiquettes_sur_ecran,
)
from avscope.base.erreurs import ErreurDonnees
from avscope.sous_agents_gouvernes.agent_Calibration.calibration_isotonique import (
    calibrate,
    ecrire_carte,
    exemples_calibration,
    lire_carte,
    pava_isotonic_fit,
)


class AgentCalibration(AgentBase):
    def __init__(self, power_weighted: bool = False):
        super().__init__(nom_agent="AgentCalibration")
        self.power_weighted = power_weighted
        self.logger.info(f"✅ AgentCalibration prêt (pondération par puissance : {power_weighted}).")

    def build_calibration_dataset(self, modele, exemples: Sequence[ExempleAV]) -> List[CalibrationExample]:
        """Exemples simples et MoMs mélangés ; les clips NOn (sans étiquette unanime) sont ignorés."""
        jeu: List[CalibrationExample] = []
        ignores = 0
        for exemple in exemples:
            if exemple.type_clip == TypeClip.NON:
                ignores += 1
                continue
            estimations, decision = modele.inferer(exemple)
            mixit = None
            if exemple.mom.est_mom and exemple.type_clip == TypeClip.SUR_ECRAN:
                mixit = modele.etiquettes_mixit(estimations, exemple.mom)
            etiquettes = etiquettes_sur_ecran(exemple.type_clip, exemple.mom.est_mom, estimations.nb_sources, mixit)
            puissances = estimations.puissances if self.power_weighted else None
            jeu.extend(exemples_calibration(decision.probabilities, etiquettes, puissances))

        if not jeu:
            raise ErreurDonnees("build_calibration_dataset: aucun exemple étiqueté")
        if ignores:
            self.logger.log_warning(f"⚠️ {ignores} clips NOn ignorés (pas d'étiquette unanime).")
        positifs = sum(e.label for e in jeu)
        self.stats_manager.incrementer_stat_specifique("exemples_calibration", len(jeu))
        self.logger.log_thought(f"Jeu de calibration : {len(jeu)} sources, {positifs} à l'écran.")
        return self.valider_sortie(jeu)

    def ajuster(self, jeu: Sequence[CalibrationExample]) -> CalibrationMap:
        carte = pava_isotonic_fit(jeu)
        self.logger.log_metrique("calibration", {
            "points": len(carte.breakpoints),
            "valeur_min": float(carte.values[0]),
            "valeur_max": float(carte.values[-1]),
        })
        return self.valider_sortie(carte)

    def calibrer(self, carte: CalibrationMap, y_hat) -> np.ndarray:
        return calibrate(carte, y_hat)

    def sauvegarder(self, carte: CalibrationMap, chemin: Union[str, Path]) -> Path:
        chemin = ecrire_carte(carte, chemin)
        self.logger.info(f"💾 Calibration écrite : {chemin}")
        return chemin

    def charger(self, chemin: Union[str, Path]) -> CalibrationMap:
        return self.valider_sortie(lire_carte(chemin))
