#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AgentExperience - Orchestrateur des commandes AVSCOPE
=====================================================
Pipeline complet : synth-data → train (pretrain_separation puis joint) → calibrate → evaluate,
plus le banc de complexité des encodeurs.

Architecture :
    - Pattern : Orchestrateur centralisé (Hub & Spoke), seul agent qui importe les autres.
    - Le ModeleAV est construit ici puis injecté dans AgentEntraineur, AgentCalibration et AgentEvaluation.

Arborescence de sortie (--out) :
    donnees/<split>/...                       jeux synthétiques
    entrainement/checkpoint_<mode>.avsc       poids + état Adam (+ .json : métadonnées)
    entrainement/pertes_<mode>.csv            une ligne par pas
    calibration.txt                           carte isotonique
    evaluation/rapport.json, rapport.txt      MetricsReport
    banc_attention.csv                        pics α mesurés / attendus + durées
"""
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from avscope.base.META_agent import AgentBase
from avscope.base.contrats_interface import (
    CalibrationMap,
    ConditionFond,
    EncoderVariant,
    ExempleAV,
    ManifesteJeu,
    MetricsReport,
    ModeEntrainement,
    ResultatEntrainement,
)
from avscope.base.erreurs import ErreurConfiguration, ErreurES
from avscope.sous_agents_gouvernes.agent_Calibration.agent_Calibration import AgentCalibration
from avscope.sous_agents_gouvernes.agent_Entraineur.agent_Entraineur import AgentEntraineur
from avscope.sous_agents_gouvernes.agent_Entraineur.pas_entrainement import ReglagesEntrainement
from avscope.sous_agents_gouvernes.agent_Evaluation.agent_Evaluation import AgentEvaluation
from avscope.sous_agents_gouvernes.agent_Experience.banc_attention import (
    STATUT_ECART,
    STATUT_REFUS,
    CelluleBanc,
    MesureBanc,
    ecrire_csv,
    mesurer_cellule,
)
from avscope.sous_agents_gouvernes.agent_Experience.config_experience import ExperimentConfig
from avscope.sous_agents_gouvernes.agent_Experience.modele_av import ModeleAV
from avscope.sous_agents_gouvernes.agent_Perception.jeu_donnees import NOM_MANIFESTE, SIMPLE, SPLITS

DOSSIER_DONNEES = "donnees"
DOSSIER_ENTRAINEMENT = "entrainement"
DOSSIER_EVALUATION = "evaluation"
NOM_CALIBRATION = "calibration.txt"
NOM_BANC = "banc_attention.csv"


def reglages_depuis(cfg: ExperimentConfig) -> ReglagesEntrainement:
    e = cfg.entrainement
    return ReglagesEntrainement(
        learning_rate=e.learning_rate,
        batch_size=e.batch_size,
        weight_mixit=e.weight_mixit,
        weight_classifier=e.weight_classifier,
        checkpoint_every=e.checkpoint_every,
        classifier_grad_to_separator=e.classifier_grad_to_separator,
        graine=cfg.seed,
    )


def nom_condition(condition: str) -> str:
    """Nom de ligne du rapport : "single", "mom_offscreen", "mom_random"."""
    return condition if condition == SIMPLE else f"mom_{condition}"


def chemin_meta(checkpoint: Union[str, Path]) -> Path:
    checkpoint = Path(checkpoint)
    return checkpoint.with_suffix(checkpoint.suffix + ".json")


class AgentExperience(AgentBase):
    def __init__(self, cfg: ExperimentConfig, dossier_sortie: Union[str, Path]):
        super().__init__(nom_agent="AgentExperience")
        self.cfg = cfg
        self.dossier = Path(dossier_sortie)
        self._initialiser_modele()
        self._initialiser_sous_agents()
        self.logger.info(
            f"✅ AgentExperience prêt (graine {cfg.seed}, variante {cfg.modele.variant.value}, sortie {self.dossier})."
        )

    def _initialiser_modele(self) -> None:
        self.modele = ModeleAV(self.cfg)
        self.logger.log_thought(
            f"ModeleAV construit : {self.modele.params.nb_scalaires('sep/')} scalaires sep/, "
            f"{self.modele.params.nb_scalaires()} au total."
        )

    def _initialiser_sous_agents(self) -> None:
        self.entraineur = AgentEntraineur(reglages_depuis(self.cfg))
        self.calibration = AgentCalibration(self.cfg.evaluation.power_weighted_calibration)
        self.evaluation = AgentEvaluation()

    # ------------------------------------------------------
    # Utilitaires
    # ------------------------------------------------------
    def _dossier_donnees(self, donnees: Optional[Union[str, Path]]) -> Path:
        return Path(donnees) if donnees is not None else self.dossier / DOSSIER_DONNEES

    def _charger(self, donnees: Optional[Union[str, Path]], split: str, condition: str) -> List[ExempleAV]:
        chemin = self._dossier_donnees(donnees) / split / NOM_MANIFESTE
        _, exemples = self.modele.perception.charger_jeu(chemin, condition)
        return exemples

    def _charger_checkpoint(self, checkpoint: Union[str, Path]) -> Dict:
        _, pas = self.modele.charger(checkpoint)
        meta = self._lire_meta(checkpoint)
        self.logger.log_thought(f"Checkpoint {checkpoint} chargé (pas {pas}, méta {meta}).")
        return meta

    def _ecrire_meta(self, checkpoint: Union[str, Path], meta: Dict) -> None:
        chemin = chemin_meta(checkpoint)
        try:
            chemin.write_text(json.dumps(meta, indent=2, ensure_ascii=False), encoding="utf-8")
        except OSError as e:
            raise ErreurES(f"Écriture impossible de {chemin}: {e}", chemin=str(chemin)) from e

    @staticmethod
    def _lire_meta(checkpoint: Union[str, Path]) -> Dict:
        chemin = chemin_meta(checkpoint)
        if not chemin.exists():
            return {}
        try:
            return json.loads(chemin.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ErreurES(f"Métadonnées de checkpoint illisibles {chemin}: {e}", chemin=str(chemin)) from e

    def _preparer_dossier(self) -> None:
        try:
            self.dossier.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ErreurES(f"Création impossible de {self.dossier}: {e}", chemin=str(self.dossier)) from e

    def _compter(self) -> None:
        self.stats_manager.incrementer_stat_specifique("commandes_executees")
        self.logger.log_thought(self.stats_manager.obtenir_resume())

    # ------------------------------------------------------
    # Commandes
    # ------------------------------------------------------
    def cli_synth_data(self, donnees: Optional[Union[str, Path]] = None) -> List[ManifesteJeu]:
        d = self.cfg.donnees
        tailles = {"train": d.n_train, "validation": d.n_validation, "test": d.n_test}
        dossier = self._dossier_donnees(donnees)
        manifestes = [
            self.modele.perception.generer_jeu(dossier, split, tailles[split], self.cfg.seed,
                                               d.background, d.wav_subtype)
            for split in SPLITS
        ]
        self._compter()
        self.logger.info(f"📦 Jeux synthétiques écrits dans {dossier} : {tailles}")
        return self.valider_sortie(manifestes)

    def cli_train(self, mode: ModeEntrainement, donnees: Optional[Union[str, Path]] = None,
                  pretrained: Optional[Union[str, Path]] = None,
                  reprise: Optional[Union[str, Path]] = None) -> ResultatEntrainement:
        mode = ModeEntrainement(mode)
        if pretrained is not None and mode != ModeEntrainement.JOINT:
            raise ErreurConfiguration("--pretrained n'a de sens qu'en mode joint")
        exemples = self._charger(donnees, "train", self.cfg.donnees.background.value)

        if pretrained is not None:
            nb = self.modele.charger_separateur(pretrained)
            self.logger.info(f"🧩 Séparateur pré-entraîné chargé depuis {pretrained} ({nb} tenseurs sep/).")

        nb_pas = self.cfg.entrainement.steps_pretrain if mode == ModeEntrainement.PRETRAIN_SEPARATION \
            else self.cfg.entrainement.steps_joint
        resultat = self.entraineur.entrainer(self.modele, exemples, mode, nb_pas,
                                             self.dossier / DOSSIER_ENTRAINEMENT, reprise)
        pretraine = pretrained is not None or bool(reprise and self._lire_meta(reprise).get("pretraine"))
        self._ecrire_meta(resultat.chemin_checkpoint, {
            "mode": mode.value,
            "pretraine": pretraine,
            "graine": self.cfg.seed,
            "variante": self.cfg.modele.variant.value,
        })
        self._compter()
        return self.valider_sortie(resultat)

    def cli_calibrate(self, checkpoint: Union[str, Path],
                      donnees: Optional[Union[str, Path]] = None) -> CalibrationMap:
        """Carte ajustée sur la validation : mélanges simples + MoMs des deux fonds."""
        self._charger_checkpoint(checkpoint)
        exemples: List[ExempleAV] = []
        for condition in [SIMPLE] + [c.value for c in ConditionFond]:
            exemples.extend(self._charger(donnees, "validation", condition))
        jeu = self.calibration.build_calibration_dataset(self.modele, exemples)
        carte = self.calibration.ajuster(jeu)
        self._preparer_dossier()
        self.calibration.sauvegarder(carte, self.dossier / NOM_CALIBRATION)
        self._compter()
        return self.valider_sortie(carte)

    def cli_evaluate(self, checkpoint: Union[str, Path], calibration: Optional[Union[str, Path]] = None,
                     donnees: Optional[Union[str, Path]] = None,
                     conditions: Sequence[Union[str, ConditionFond]] = tuple(ConditionFond)) -> MetricsReport:
        meta = self._charger_checkpoint(checkpoint)
        carte = self.calibration.charger(calibration) if calibration is not None else None
        jeux: Dict[str, List[ExempleAV]] = {}
        for condition in [SIMPLE] + [ConditionFond(c).value for c in conditions]:
            jeux[nom_condition(condition)] = self._charger(donnees, "test", condition)

        rapport = self.evaluation.evaluate_dataset(
            self.modele, jeux, carte,
            graine=self.cfg.seed,
            variante=self.cfg.modele.variant.value,
            pretraine=bool(meta.get("pretraine", False)),
        )
        self.evaluation.ecrire_rapport(rapport, self.dossier / DOSSIER_EVALUATION)
        self._compter()
        return self.valider_sortie(rapport)

    def cli_bench_attention(self, cellules: Sequence[CelluleBanc],
                            variantes: Sequence[Union[str, EncoderVariant]] = tuple(EncoderVariant),
                            chemin_csv: Optional[Union[str, Path]] = None) -> List[MesureBanc]:
        if not cellules:
            raise ErreurConfiguration("bench-attention: grille vide")
        maximum = self.cfg.evaluation.bench_max_elements
        mesures = []
        for cellule in cellules:
            for variante in variantes:
                mesure = mesurer_cellule(cellule, variante, maximum, graine=self.cfg.seed)
                mesures.append(mesure)
                if mesure.statut == STATUT_REFUS:
                    self.logger.log_warning(
                        f"⚠️ {mesure.variante.value} {cellule} refusée : pic attendu {mesure.attendu_etape} > {maximum:.0f}"
                    )
                elif mesure.statut == STATUT_ECART:
                    self.logger.log_error(
                        f"❌ {mesure.variante.value} {cellule} : mesuré ({mesure.mesure_etape}, {mesure.mesure_tenseur}) "
                        f"≠ attendu ({mesure.attendu_etape}, {mesure.attendu_tenseur})"
                    )
                else:
                    self.logger.log_metrique(f"banc/{mesure.variante.value}", {
                        "pic_etape": mesure.mesure_etape, "duree_ms": mesure.duree_ms,
                    })
        ecrire_csv(mesures, chemin_csv or self.dossier / NOM_BANC)
        self._compter()
        return self.valider_sortie(mesures)
