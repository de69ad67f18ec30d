#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AgentPerception - Données synthétiques et caractéristiques figées
==================================================================
Deux rôles :
1. Fabriquer et relire les jeux synthétiques (synthese_av.py, jeu_donnees.py).
2. Transformer sources séparées et trames vidéo en (Z_A, Z_V) (caracteristiques.py).

Les caractéristiques n'ont aucun paramètre entraînable : elles restent gelées pendant
l'entraînement, comme les réseaux d'embedding qu'elles remplacent.
"""
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from avscope.base.META_agent import AgentBase
from avscope.base.contrats_interface import ConditionFond, ExempleAV, ManifesteJeu, TypeClip
from avscope.moteurs.moteur_tenseur import AxisTaggedTensor
from avscope.sous_agents_gouvernes.agent_Perception.caracteristiques import (
    FeatureConfig,
    audio_features,
    video_features,
)
from avscope.sous_agents_gouvernes.agent_Perception.jeu_donnees import (
    SIMPLE,
    charger_split,
    ecrire_split,
    generer_split,
    verifier_compatibilite,
)
from avscope.sous_agents_gouvernes.agent_Perception.synthese_av import SyntheseConfig, synth_av_example


class AgentPerception(AgentBase):
    def __init__(self, synthese: SyntheseConfig, features: FeatureConfig):
        super().__init__(nom_agent="AgentPerception")
        self.synthese = synthese
        self.features = features
        self.logger.info(
            f"✅ AgentPerception prêt (T={synthese.T}, G={synthese.G}, D={features.D}, "
            f"corrélation {synthese.correlation.value})."
        )

    def synthetiser(self, rng: np.random.Generator, type_clip: TypeClip = TypeClip.NON,
                    nb_visibles: Optional[int] = None, mom: bool = True,
                    identifiant: str = "exemple") -> ExempleAV:
        exemple = synth_av_example(rng, self.synthese, type_clip, nb_visibles, mom, identifiant)
        self.stats_manager.incrementer_stat_specifique("exemples_synthetises")
        return self.valider_sortie(exemple)

    def generer_jeu(self, dossier: Union[str, Path], split: str, n: int, graine: int,
                    background: ConditionFond = ConditionFond.OFFSCREEN,
                    wav_subtype: str = "FLOAT") -> ManifesteJeu:
        """Synthétise puis écrit un split complet (WAV + AVSC + manifeste JSON)."""
        bruts = generer_split(self.synthese, split, n, graine, background)
        manifeste = ecrire_split(bruts, self.synthese, dossier, split, graine, wav_subtype)
        self.stats_manager.incrementer_stat_specifique("exemples_synthetises", len(bruts))
        self.logger.info(f"💾 Split '{split}' : {len(bruts)} exemples écrits dans {Path(dossier) / split}")
        return self.valider_sortie(manifeste)

    def charger_jeu(self, chemin: Union[str, Path], condition: str = SIMPLE) -> Tuple[ManifesteJeu, List[ExempleAV]]:
        manifeste, exemples = charger_split(chemin, condition)
        verifier_compatibilite(manifeste, self.synthese)
        self.stats_manager.incrementer_stat_specifique("exemples_charges", len(exemples))
        self.logger.log_thought(f"Split '{manifeste.split}' rechargé ({len(exemples)} exemples, condition {condition})")
        return self.valider_sortie((manifeste, exemples))

    def caracteristiques(self, sources, frames) -> Tuple[AxisTaggedTensor, AxisTaggedTensor]:
        """(Z_A, Z_V) ; sources (…, M, T') et trames (…, T, H, W, C), torch ou numpy."""
        return self.valider_sortie((audio_features(sources, self.features), video_features(frames, self.features)))
