#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Agent Experience
Cible : avscope/sous_agents_gouvernes/agent_Experience/ (config, banc, orchestrateur)
Objectif : configuration stricte et aller-retour YAML, banc de complexité contre les formes
fermées, pipeline synth → pretrain → joint → calibrate → evaluate sur une configuration micro.
"""
import csv
import os
import tempfile
import unittest
from pathlib import Path

import numpy as np

from avscope.base.contrats_interface import EncoderVariant, ModeEntrainement
from avscope.base.erreurs import ErreurConfiguration
from avscope.sous_agents_gouvernes.agent_Calibration.calibration_isotonique import lire_carte
from avscope.sous_agents_gouvernes.agent_Experience.agent_Experience import (
    NOM_CALIBRATION,
    AgentExperience,
    chemin_meta,
    nom_condition,
)
from avscope.sous_agents_gouvernes.agent_Experience.banc_attention import (
    ENTETE_CSV,
    STATUT_OK,
    STATUT_REFUS,
    CelluleBanc,
    grille_cellules,
    grille_spatiale,
    mesurer_cellule,
)
from avscope.sous_agents_gouvernes.agent_Experience.config_experience import ExperimentConfig

CONFIG_YAML = Path(__file__).with_name("config_experience.yaml")
TESTS_LONGS = os.environ.get("AVSCOPE_TESTS_LONGS") == "1"


def _config_micro(**evaluation):
    return ExperimentConfig.depuis_dict({
        "experience": {"seed": 7},
        "donnees": {"sample_rate": 800, "fps": 4, "grid_h": 2, "grid_w": 2, "patch": 2,
                    "n_train": 6, "n_validation": 6, "n_test": 6},
        "modele": {"M": 2, "D": 8, "H": 2, "L": 1, "n_filters": 4, "kernel": 4, "dilations": [1], "n_mels": 8},
        "entrainement": {"batch_size": 2, "steps_pretrain": 3, "steps_joint": 3, "checkpoint_every": 2,
                         "learning_rate": 1e-3},
        "evaluation": evaluation,
    })


# ========================================
# CONFIGURATION
# ========================================

class TestConfiguration(unittest.TestCase):
    def test_yaml_par_defaut(self):
        cfg = ExperimentConfig.charger(CONFIG_YAML)
        self.assertEqual((cfg.G, cfg.T, cfg.longueur), (64, 16, 8000))
        self.assertEqual(cfg.modele.variant, EncoderVariant.SEP_SA)
        self.assertEqual(cfg.entrainement.batch_size, 8)

    def test_aller_retour(self):
        cfg = _config_micro().avec_graine(11)
        with tempfile.TemporaryDirectory() as d:
            chemin = cfg.sauvegarder(Path(d) / "config.yaml")
            relue = ExperimentConfig.charger(chemin)
        self.assertEqual(relue, cfg)
        self.assertEqual(relue.seed, 11)
        self.assertEqual(ExperimentConfig.depuis_dict(cfg.model_dump()), cfg)

    def test_cle_inconnue_refusee(self):
        with self.assertRaises(ErreurConfiguration):
            ExperimentConfig.depuis_dict({"modele": {"profondeur": 3}})
        with self.assertRaises(ErreurConfiguration):
            ExperimentConfig.depuis_dict({"inconnue": {}})

    def test_coherence(self):
        with self.assertRaises(ErreurConfiguration):
            ExperimentConfig.depuis_dict({"donnees": {"sample_rate": 1000, "fps": 3}})
        with self.assertRaises(ErreurConfiguration):
            ExperimentConfig.depuis_dict({"modele": {"D": 10, "H": 4}})
        with self.assertRaises(ErreurConfiguration):
            ExperimentConfig.depuis_dict({"modele": {"variant": "FULL_ATTENTION"}})


# ========================================
# BANC DE COMPLEXITÉ
# ========================================

class TestBanc(unittest.TestCase):
    def test_grille_spatiale(self):
        self.assertEqual(grille_spatiale(64), (8, 8))
        self.assertEqual(grille_spatiale(12), (3, 4))
        self.assertEqual(grille_spatiale(7), (1, 7))

    def test_mesures_egales_aux_formes_fermees(self):
        for cellule in grille_cellules([1, 2], [2, 4], [2, 3], [1, 2], [4]):
            for variante in EncoderVariant:
                mesure = mesurer_cellule(cellule, variante, max_elements=1e9)
                self.assertEqual(mesure.statut, STATUT_OK, (cellule, variante))
                self.assertGreaterEqual(mesure.duree_ms, 0.0)

    def test_valeurs_de_reference(self):
        cellule = CelluleBanc(M=4, G=64, T=16, H=4, D=8)
        joint = mesurer_cellule(cellule, EncoderVariant.JOINT_SA, max_elements=1)
        sep = mesurer_cellule(cellule, EncoderVariant.SEP_SA, max_elements=1)
        self.assertEqual((joint.attendu_etape, sep.attendu_etape), (4_734_976, 295_936))
        self.assertEqual(joint.statut, STATUT_REFUS)
        self.assertIsNone(joint.mesure_etape)

    @unittest.skipUnless(TESTS_LONGS, "AVSCOPE_TESTS_LONGS=1 pour la cellule pleine taille")
    def test_cellule_pleine_taille(self):
        cellule = CelluleBanc(M=4, G=64, T=16, H=4, D=8)
        for variante, attendu in ((EncoderVariant.JOINT_SA, 4_734_976), (EncoderVariant.SEP_SA, 295_936)):
            mesure = mesurer_cellule(cellule, variante, max_elements=5e7)
            self.assertEqual(mesure.mesure_etape, attendu)

    def test_cellule_invalide(self):
        with self.assertRaises(ErreurConfiguration):
            CelluleBanc(M=2, G=4, T=3, H=3, D=8)

    def test_agent_ecrit_le_csv(self):
        with tempfile.TemporaryDirectory() as d:
            agent = AgentExperience(_config_micro(bench_max_elements=200), d)
            cellules = [CelluleBanc(1, 2, 2, 1, 4), CelluleBanc(2, 4, 4, 2, 4)]
            mesures = agent.cli_bench_attention(cellules, [EncoderVariant.JOINT_SA, EncoderVariant.SEP_SA])
            with open(Path(d) / "banc_attention.csv", encoding="utf-8", newline="") as f:
                lignes = list(csv.reader(f))
        self.assertEqual(lignes[0], ENTETE_CSV)
        self.assertEqual(len(lignes) - 1, 4)
        statuts = [m.statut for m in mesures]
        self.assertEqual(statuts[:2], [STATUT_OK, STATUT_OK])
        self.assertEqual(statuts[2], STATUT_REFUS)
        self.assertEqual(lignes[3][-1], STATUT_REFUS)


# ========================================
# PIPELINE COMPLET (configuration micro)
# ========================================

class TestPipeline(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dossier = Path(cls.tmp.name)
        cls.cfg = _config_micro()
        cls.agent = AgentExperience(cls.cfg, cls.dossier)
        cls.manifestes = cls.agent.cli_synth_data()
        cls.pretrain = cls.agent.cli_train(ModeEntrainement.PRETRAIN_SEPARATION)
        cls.joint_agent = AgentExperience(cls.cfg, cls.dossier)
        cls.joint = cls.joint_agent.cli_train(ModeEntrainement.JOINT, pretrained=cls.pretrain.chemin_checkpoint)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_splits_disjoints_et_complets(self):
        self.assertEqual([m.split for m in self.manifestes], ["train", "validation", "test"])
        self.assertTrue(all(len(m.exemples) == 6 for m in self.manifestes))
        ids = [{e.identifiant for e in m.exemples} for m in self.manifestes]
        self.assertFalse(ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])

    def test_synthese_deterministe(self):
        with tempfile.TemporaryDirectory() as d:
            AgentExperience(self.cfg, d).cli_synth_data()
            for split in ("train", "validation", "test"):
                relatif = Path("donnees") / split / "manifeste.json"
                self.assertEqual((Path(d) / relatif).read_text(encoding="utf-8"),
                                 (self.dossier / relatif).read_text(encoding="utf-8"))

    def test_journaux_et_meta(self):
        for resultat, pt in ((self.pretrain, False), (self.joint, True)):
            with open(resultat.chemin_journal_pertes, encoding="utf-8", newline="") as f:
                self.assertEqual(len(list(csv.reader(f))) - 1, 3)
            meta = AgentExperience._lire_meta(resultat.chemin_checkpoint)
            self.assertEqual(meta["pretraine"], pt)
        self.assertTrue(chemin_meta(self.joint.chemin_checkpoint).exists())

    def test_pretrained_refuse_en_pretrain(self):
        with self.assertRaises(ErreurConfiguration):
            self.agent.cli_train(ModeEntrainement.PRETRAIN_SEPARATION, pretrained=self.pretrain.chemin_checkpoint)

    def test_calibration_puis_evaluation(self):
        agent = AgentExperience(self.cfg, self.dossier)
        carte = agent.cli_calibrate(self.joint.chemin_checkpoint)
        relue = lire_carte(self.dossier / NOM_CALIBRATION)
        self.assertEqual(relue.values, carte.values)

        rapport = agent.cli_evaluate(self.joint.chemin_checkpoint, self.dossier / NOM_CALIBRATION)
        self.assertTrue(rapport.pretraine)
        conditions = {l.condition for l in rapport.lignes}
        self.assertEqual(conditions, {nom_condition(c) for c in ("single", "offscreen", "random")})
        self.assertEqual(len(rapport.lignes), 6)
        for condition in conditions:
            brute, calibree = rapport.ligne(condition), rapport.ligne(condition, calibre=True)
            self.assertEqual(brute.mixit_star_db, calibree.mixit_star_db)
            self.assertEqual(brute.nb_exemples["total"], 6)
        self.assertEqual(rapport.ligne("single").mixit_star_db, [])
        self.assertTrue((self.dossier / "evaluation" / "rapport.json").exists())

        encore = AgentExperience(self.cfg, self.dossier).cli_evaluate(
            self.joint.chemin_checkpoint, self.dossier / NOM_CALIBRATION)
        self.assertEqual([l.resume() for l in encore.lignes], [l.resume() for l in rapport.lignes])

    def test_manifeste_incompatible(self):
        autre = ExperimentConfig.depuis_dict({**self.cfg.model_dump(), "donnees": {
            **self.cfg.donnees.model_dump(), "fps": 8}})
        with self.assertRaises(ErreurConfiguration):
            AgentExperience(autre, self.dossier).cli_train(ModeEntrainement.PRETRAIN_SEPARATION)

    def test_calibration_sans_effet_sur_l_ordre(self):
        agent = AgentExperience(self.cfg, self.dossier)
        carte = agent.cli_calibrate(self.joint.chemin_checkpoint)
        scores = np.linspace(0.0, 1.0, 50)
        self.assertTrue(np.all(np.diff(carte.appliquer(scores)) >= 0))


if __name__ == "__main__":
    unittest.main()
