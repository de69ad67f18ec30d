#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Agent Evaluation
Cible : avscope/sous_agents_gouvernes/agent_Evaluation/ (metriques.py + agent_Evaluation.py)
Objectif : valeurs chiffrées des métriques, invariances, oracle AUC par paires,
agrégation par condition et lignes calibrées.
"""
import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import MagicMock

import numpy as np

from avscope.base.contrats_interface import (
    AssignmentMatrix,
    CalibrationMap,
    OnScreenDecision,
    SourceEstimates,
    TypeClip,
)
from avscope.base.erreurs import ErreurDonnees, ErreurForme
from avscope.sous_agents_gouvernes.agent_Evaluation.agent_Evaluation import AgentEvaluation, tableau_texte
from avscope.sous_agents_gouvernes.agent_Evaluation.metriques import (
    CAP_DB,
    mixit_star,
    osr,
    power_weighted_auc,
    si_snr,
    si_snr_detaille,
)
from avscope.sous_agents_gouvernes.agent_Perception.synthese_av import SyntheseConfig, synth_av_example
from avscope.sous_agents_gouvernes.agent_Separation.mixit import mixit_best_assignment, pseudo_labels


def _auc_par_paires(scores, labels, poids):
    num = den = 0.0
    for i in np.flatnonzero(labels == 1):
        for j in np.flatnonzero(labels == 0):
            w = poids[i] * poids[j]
            den += w
            num += w * (1.0 if scores[i] > scores[j] else 0.5 if scores[i] == scores[j] else 0.0)
    return num / den


# ========================================
# SI-SNR / OSR
# ========================================

class TestSiSnr(unittest.TestCase):
    def test_valeurs_chiffrees(self):
        ref = np.random.default_rng(0).standard_normal(64)
        self.assertEqual(si_snr(ref, 3.7 * ref), CAP_DB)
        self.assertAlmostEqual(si_snr([1.0, 0.0], [1.0, 1.0]), 0.0, places=12)

    def test_invariance_a_l_echelle(self):
        rng = np.random.default_rng(1)
        ref, est = rng.standard_normal(100), rng.standard_normal(100)
        for c in (0.01, 2.5, -3.0):
            self.assertAlmostEqual(si_snr(ref, c * est), si_snr(ref, est), places=9)

    def test_permutation_commune(self):
        rng = np.random.default_rng(2)
        ref, est = rng.standard_normal(50), rng.standard_normal(50)
        p = rng.permutation(50)
        self.assertAlmostEqual(si_snr(ref[p], est[p]), si_snr(ref, est), places=9)

    def test_cas_degeneres(self):
        with self.assertRaises(ErreurDonnees):
            si_snr(np.zeros(8), np.ones(8))
        self.assertEqual(si_snr_detaille(np.ones(8), np.zeros(8)), (-CAP_DB, True))
        with self.assertRaises(ErreurForme):
            si_snr(np.ones(8), np.ones(7))


class TestOSR(unittest.TestCase):
    def test_valeurs_chiffrees(self):
        x = np.random.default_rng(3).standard_normal(80)
        self.assertAlmostEqual(osr(x, x), 0.0, places=12)
        self.assertEqual(osr(x, np.zeros(80)), CAP_DB)
        self.assertAlmostEqual(osr(x, x / np.sqrt(10.0)), 10.0, places=9)

    def test_identite_de_puissance(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            x, on = rng.standard_normal(40), rng.uniform(0.1, 2.0) * rng.standard_normal(40)
            self.assertAlmostEqual(osr(x, on) + 10 * np.log10(np.sum(on ** 2) / np.sum(x ** 2)), 0.0, delta=1e-9)

    def test_entree_nulle(self):
        with self.assertRaises(ErreurDonnees):
            osr(np.zeros(4), np.ones(4))


# ========================================
# AUC PONDÉRÉE
# ========================================

class TestAUC(unittest.TestCase):
    def test_exemples_chiffres(self):
        self.assertEqual(power_weighted_auc([0.9, 0.1], [1, 0], [1, 1]), 1.0)
        self.assertAlmostEqual(power_weighted_auc([0.9, 0.8, 0.1], [1, 0, 1], [1, 1, 4]), 0.2, places=12)

    def test_une_seule_classe(self):
        self.assertIsNone(power_weighted_auc([0.2, 0.7], [1, 1], [1, 1]))
        self.assertIsNone(power_weighted_auc([0.2, 0.7], [0, 0], [1, 3]))

    def test_poids_unitaires_contre_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = int(rng.integers(4, 30))
            scores = np.round(rng.random(n), 1)
            labels = rng.integers(0, 2, n)
            labels[:2] = [0, 1]
            self.assertAlmostEqual(power_weighted_auc(scores, labels, np.ones(n)),
                                   _auc_par_paires(scores, labels, np.ones(n)), delta=1e-12)

    def test_poids_contre_oracle(self):
        rng = np.random.default_rng(6)
        scores, labels, poids = np.round(rng.random(25), 1), rng.integers(0, 2, 25), rng.uniform(0.1, 5.0, 25)
        labels[:2] = [0, 1]
        self.assertAlmostEqual(power_weighted_auc(scores, labels, poids),
                               _auc_par_paires(scores, labels, poids), delta=1e-9)

    def test_scores_aleatoires_equilibres(self):
        rng = np.random.default_rng(7)
        labels = np.repeat([0, 1], 5000)
        auc = power_weighted_auc(rng.random(10000), labels, np.ones(10000))
        self.assertTrue(0.45 <= auc <= 0.55, auc)

    def test_entrees_invalides(self):
        with self.assertRaises(ErreurForme):
            power_weighted_auc([0.1, 0.2], [0, 1], [1.0])
        with self.assertRaises(ErreurDonnees):
            power_weighted_auc([0.1, 0.2], [0, 1], [1.0, -1.0])


# ========================================
# MIXIT*
# ========================================

class TestMixitStar(unittest.TestCase):
    def test_partition_parfaite(self):
        rng = np.random.default_rng(8)
        sources = rng.standard_normal((3, 64))
        assignation = AssignmentMatrix(np.array([[1, 0, 1], [0, 1, 0]]))
        self.assertEqual(mixit_star(sources, sources[0] + sources[2], assignation), CAP_DB)

    def test_recomposition(self):
        rng = np.random.default_rng(9)
        sources = rng.standard_normal((4, 64))
        x1, x2 = rng.standard_normal(64), rng.standard_normal(64)
        assignation, _ = mixit_best_assignment(sources, x1, x2)
        attendu = si_snr(x1, sources[assignation.matrice[0] == 1].sum(axis=0))
        self.assertAlmostEqual(mixit_star(sources, x1, assignation), attendu, places=12)

    def test_borne_avec_pseudo_etiquettes(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            sources = rng.standard_normal((3, 32))
            x1, x2 = sources[0] + 0.1 * rng.standard_normal(32), sources[1] + sources[2]
            assignation, _ = mixit_best_assignment(sources, x1, x2)
            x_on = pseudo_labels(assignation).astype(float) @ sources
            self.assertGreaterEqual(mixit_star(sources, x1, assignation) + 1e-12, si_snr(x1, x_on))


# ========================================
# AGENT (modèle simulé)
# ========================================

def _inferer(exemple, carte=None):
    x = exemple.mom.entree.samples
    if exemple.mom.est_mom:
        x1 = exemple.mom.on_screen_mix.samples
        sources = np.stack([x1, x - x1])
    else:
        sources = np.stack([0.7 * x, 0.3 * x])
    y = np.array([0.8, 0.3])
    return SourceEstimates(sources, exemple.mom.entree.sample_rate), OnScreenDecision(y, y @ sources)


class TestAgentEvaluation(unittest.TestCase):
    def setUp(self):
        cfg = SyntheseConfig(sample_rate=800, fps=4, grid_h=2, grid_w=2, patch=2)
        rng = np.random.default_rng(0)
        self.simples = [
            synth_av_example(rng, cfg, TypeClip.SUR_ECRAN, mom=False, identifiant="s-on"),
            synth_av_example(rng, cfg, TypeClip.HORS_ECRAN, mom=False, identifiant="s-off"),
        ]
        self.moms = [
            synth_av_example(rng, cfg, TypeClip.SUR_ECRAN, mom=True, identifiant="m-on"),
            synth_av_example(rng, cfg, TypeClip.HORS_ECRAN, mom=True, identifiant="m-off"),
        ]
        self.modele = MagicMock()
        self.modele.inferer.side_effect = _inferer
        self.modele.assignation_mixit.return_value = AssignmentMatrix(np.array([[1, 0], [0, 1]]))

    def _evaluer(self, carte=None, nb_workers=1):
        return AgentEvaluation(nb_workers).evaluate_dataset(
            self.modele, {"single": self.simples, "mom_offscreen": self.moms}, carte=carte, graine=3,
            variante="SEP_SA", pretraine=True,
        )

    def test_lignes_par_condition(self):
        rapport = self._evaluer()
        self.assertEqual([(l.condition, l.calibre) for l in rapport.lignes],
                         [("single", False), ("mom_offscreen", False)])
        simple = rapport.ligne("single")
        self.assertEqual(simple.on_si_snr_db, [CAP_DB])
        self.assertAlmostEqual(simple.osr_db[0], -20 * np.log10(0.65), places=9)
        self.assertEqual(simple.mixit_star_db, [])
        self.assertEqual(simple.nb_exemples["total"], 2)
        mom = rapport.ligne("mom_offscreen")
        self.assertEqual(mom.mixit_star_db, [CAP_DB])
        self.assertEqual(len(mom.input_si_snr_db), 1)
        self.assertEqual(mom.resume()["mixit_star_median_db"], CAP_DB)
        self.assertIsNotNone(mom.auc)

    def test_lignes_calibrees(self):
        carte = CalibrationMap([0.0, 1.0], [0.0, 0.0])
        rapport = self._evaluer(carte)
        self.assertEqual(len(rapport.lignes), 4)
        brute, calibree = rapport.ligne("mom_offscreen"), rapport.ligne("mom_offscreen", calibre=True)
        self.assertEqual(brute.mixit_star_db, calibree.mixit_star_db)
        self.assertEqual(calibree.on_si_snr_db, [-CAP_DB])
        self.assertEqual(calibree.osr_db, [CAP_DB])
        self.assertEqual(calibree.auc, 0.5)
        self.assertEqual(calibree.nb_exemples["estimations_nulles"], 1)
        self.assertEqual(brute.nb_exemples["estimations_nulles"], 0)

    def test_parallele_identique_au_sequentiel(self):
        sequentiel = [l.resume() for l in self._evaluer(nb_workers=1).lignes]
        parallele = [l.resume() for l in self._evaluer(nb_workers=3).lignes]
        self.assertEqual(sequentiel, parallele)

    def test_jeu_vide(self):
        with self.assertRaises(ErreurDonnees):
            AgentEvaluation(1).evaluate_dataset(self.modele, {"single": []})
        with self.assertRaises(ErreurDonnees):
            AgentEvaluation(1).evaluate_dataset(self.modele, {})

    def test_rapport_ecrit(self):
        agent = AgentEvaluation(1)
        rapport = self._evaluer(CalibrationMap.identite())
        with tempfile.TemporaryDirectory() as d:
            chemin_json, chemin_txt = agent.ecrire_rapport(rapport, Path(d) / "rapport")
            donnees = json.loads(chemin_json.read_text(encoding="utf-8"))
            texte = chemin_txt.read_text(encoding="utf-8")
        self.assertTrue(donnees["pretraine"])
        self.assertEqual(len(donnees["lignes"]), 4)
        for colonne in ("AUC", "On SI-SNR", "Off OSR", "MixIT*"):
            self.assertIn(colonne, texte)
        self.assertEqual(texte, tableau_texte(rapport))
        self.assertIn("SEP_SA PT", texte.splitlines()[0])


if __name__ == "__main__":
    unittest.main()
