#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Agent Calibration
Cible : avscope/sous_agents_gouvernes/agent_Calibration/ (calibration_isotonique.py + agent_Calibration.py)
Objectif : PAVA contre un oracle par partitions, exemples chiffrés, monotonie, fichier texte
et règles d'étiquetage du jeu de calibration.
"""
import itertools
import tempfile
import unittest
from pathlib import Path
from unittest.mock import MagicMock

import numpy as np

from avscope.base.contrats_interface import (
    CalibrationExample,
    CalibrationMap,
    OnScreenDecision,
    SourceEstimates,
    TypeClip,
    etiquettes_sur_ecran,
)
from avscope.base.erreurs import ErreurDonnees
from avscope.sous_agents_gouvernes.agent_Calibration.agent_Calibration import AgentCalibration
from avscope.sous_agents_gouvernes.agent_Calibration.calibration_isotonique import (
    ENTETE,
    calibrate,
    ecrire_carte,
    lire_carte,
    pava_isotonic_fit,
)
from avscope.sous_agents_gouvernes.agent_Perception.synthese_av import SyntheseConfig, synth_av_example


def _exemples(scores, labels, poids=None):
    poids = np.ones(len(scores)) if poids is None else poids
    return [CalibrationExample(float(s), int(y), float(w)) for s, y, w in zip(scores, labels, poids)]


def _oracle_partitions(scores, labels, poids):
    """Moindres carrés monotones par énumération des découpages de la chaîne triée en blocs contigus."""
    ordre = np.argsort(scores)
    y, w = np.asarray(labels, float)[ordre], np.asarray(poids, float)[ordre]
    n = len(y)
    meilleur, ajuste = np.inf, None
    for coupures in itertools.product((False, True), repeat=n - 1):
        bornes = [0] + [i + 1 for i, c in enumerate(coupures) if c] + [n]
        moyennes = [np.average(y[a:b], weights=w[a:b]) for a, b in zip(bornes, bornes[1:])]
        if any(m2 < m1 for m1, m2 in zip(moyennes, moyennes[1:])):
            continue
        valeurs = np.concatenate([np.full(b - a, m) for (a, b), m in zip(zip(bornes, bornes[1:]), moyennes)])
        cout = float(np.sum(w * (y - valeurs) ** 2))
        if cout < meilleur:
            meilleur, ajuste = cout, valeurs
    resultat = np.empty(n)
    resultat[ordre] = ajuste
    return resultat


# ========================================
# PAVA
# ========================================

class TestPAVA(unittest.TestCase):
    def test_exemple_chiffre(self):
        carte = pava_isotonic_fit(_exemples([0.1, 0.2, 0.3], [0, 1, 0]))
        np.testing.assert_allclose(calibrate(carte, [0.1, 0.2, 0.3]), [0.0, 0.5, 0.5], atol=1e-12)

    def test_etiquettes_deja_monotones(self):
        scores = [0.1, 0.4, 0.6, 0.9]
        carte = pava_isotonic_fit(_exemples(scores, [0, 0, 1, 1]))
        np.testing.assert_allclose(calibrate(carte, scores), [0, 0, 1, 1], atol=1e-12)

    def test_oracle_partitions(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(2, 11))
            scores = rng.random(n)
            labels = rng.integers(0, 2, n)
            poids = rng.uniform(0.1, 3.0, n)
            carte = pava_isotonic_fit(_exemples(scores, labels, poids))
            np.testing.assert_allclose(calibrate(carte, scores), _oracle_partitions(scores, labels, poids), atol=1e-8)
            self.assertTrue(np.all(np.diff(carte.values) >= 0))

    def test_invariance_a_l_ordre(self):
        rng = np.random.default_rng(3)
        scores, labels = rng.random(12), rng.integers(0, 2, 12)
        carte = pava_isotonic_fit(_exemples(scores, labels))
        permutation = rng.permutation(12)
        autre = pava_isotonic_fit(_exemples(scores[permutation], labels[permutation]))
        np.testing.assert_allclose(carte.breakpoints, autre.breakpoints)
        np.testing.assert_allclose(carte.values, autre.values)

    def test_scores_identiques_moyenne_ponderee(self):
        carte = pava_isotonic_fit(_exemples([0.4, 0.4, 0.4], [1, 0, 1], [1.0, 2.0, 1.0]))
        np.testing.assert_allclose(calibrate(carte, [0.0, 0.4, 1.0]), [0.5, 0.5, 0.5])

    def test_jamais_pire_qu_une_constante(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            scores, labels, poids = rng.random(30), rng.integers(0, 2, 30), rng.uniform(0.5, 2.0, 30)
            ajuste = calibrate(pava_isotonic_fit(_exemples(scores, labels, poids)), scores)
            constante = np.average(labels, weights=poids)
            self.assertLessEqual(np.sum(poids * (labels - ajuste) ** 2),
                                 np.sum(poids * (labels - constante) ** 2) + 1e-12)

    def test_trop_peu_d_exemples(self):
        with self.assertRaises(ErreurDonnees):
            pava_isotonic_fit(_exemples([0.5], [1]))


class TestCalibrate(unittest.TestCase):
    def test_identite_et_constante(self):
        y = np.array([0.0, 0.3, 0.9])
        np.testing.assert_array_equal(calibrate(CalibrationMap.identite(), y), y)
        np.testing.assert_array_equal(calibrate(CalibrationMap([0.0, 1.0], [0.0, 0.0]), y), np.zeros(3))

    def test_ordre_preserve(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            carte = pava_isotonic_fit(_exemples(rng.random(10), rng.integers(0, 2, 10)))
            a, b = np.sort(rng.random(2))
            self.assertLessEqual(calibrate(carte, a), calibrate(carte, b))

    def test_extrapolation_bloquee(self):
        carte = CalibrationMap([0.2, 0.8], [0.1, 0.7])
        np.testing.assert_allclose(calibrate(carte, [0.0, 0.5, 1.0]), [0.1, 0.4, 0.7])


class TestFichier(unittest.TestCase):
    def test_aller_retour(self):
        rng = np.random.default_rng(2)
        carte = pava_isotonic_fit(_exemples(rng.random(20), rng.integers(0, 2, 20)))
        with tempfile.TemporaryDirectory() as d:
            chemin = ecrire_carte(carte, Path(d) / "calibration.txt")
            self.assertEqual(chemin.read_text(encoding="utf-8").splitlines()[0], ENTETE)
            relue = lire_carte(chemin)
        self.assertEqual(relue.breakpoints, carte.breakpoints)
        self.assertEqual(relue.values, carte.values)

    def test_fichier_invalide(self):
        with tempfile.TemporaryDirectory() as d:
            chemin = Path(d) / "c.txt"
            chemin.write_text("0.1 0.2\n", encoding="utf-8")
            with self.assertRaises(ErreurDonnees):
                lire_carte(chemin)
            chemin.write_text(f"{ENTETE}\n0.1 0.9\n0.5 0.2\n", encoding="utf-8")
            with self.assertRaises(ErreurDonnees):
                lire_carte(chemin)


# ========================================
# JEU DE CALIBRATION
# ========================================

class TestEtiquettes(unittest.TestCase):
    def test_regles(self):
        np.testing.assert_array_equal(etiquettes_sur_ecran(TypeClip.HORS_ECRAN, False, 4), [0, 0, 0, 0])
        np.testing.assert_array_equal(etiquettes_sur_ecran(TypeClip.SUR_ECRAN, False, 3), [1, 1, 1])
        np.testing.assert_array_equal(etiquettes_sur_ecran(TypeClip.HORS_ECRAN, True, 4), [0, 0, 0, 0])
        np.testing.assert_array_equal(
            etiquettes_sur_ecran(TypeClip.SUR_ECRAN, True, 4, np.array([1, 1, 0, 0])), [1, 1, 0, 0]
        )

    def test_cas_refuses(self):
        with self.assertRaises(ErreurDonnees):
            etiquettes_sur_ecran(TypeClip.NON, False, 2)
        with self.assertRaises(ErreurDonnees):
            etiquettes_sur_ecran(TypeClip.SUR_ECRAN, True, 2)


class TestAgentCalibration(unittest.TestCase):
    def setUp(self):
        cfg = SyntheseConfig(sample_rate=800, fps=4, grid_h=2, grid_w=2, patch=2)
        rng = np.random.default_rng(0)
        self.sur_simple = synth_av_example(rng, cfg, TypeClip.SUR_ECRAN, mom=False, identifiant="a")
        self.hors_simple = synth_av_example(rng, cfg, TypeClip.HORS_ECRAN, mom=False, identifiant="b")
        self.sur_mom = synth_av_example(rng, cfg, TypeClip.SUR_ECRAN, mom=True, identifiant="c")
        self.non = synth_av_example(rng, cfg, TypeClip.NON, identifiant="d")

        self.modele = MagicMock()
        estimations = SourceEstimates(np.array([[1.0, 0.0], [0.0, 2.0], [0.5, 0.5], [0.0, 0.0]]), 800)
        decision = OnScreenDecision(np.array([0.9, 0.2, 0.6, 0.1]), np.zeros(2))
        self.modele.inferer.return_value = (estimations, decision)
        self.modele.etiquettes_mixit.return_value = np.array([1, 0, 1, 0])

    def test_regles_appliquees(self):
        agent = AgentCalibration()
        jeu = agent.build_calibration_dataset(self.modele, [self.sur_simple, self.hors_simple, self.sur_mom, self.non])
        self.assertEqual(len(jeu), 12)
        self.assertEqual([e.label for e in jeu], [1, 1, 1, 1, 0, 0, 0, 0, 1, 0, 1, 0])
        self.assertTrue(all(e.weight == 1.0 for e in jeu))
        self.modele.etiquettes_mixit.assert_called_once()

    def test_poids_puissance(self):
        jeu = AgentCalibration(power_weighted=True).build_calibration_dataset(self.modele, [self.hors_simple])
        np.testing.assert_allclose([e.weight for e in jeu], [1.0, 4.0, 0.5, 1e-12])

    def test_jeu_vide(self):
        with self.assertRaises(ErreurDonnees):
            AgentCalibration().build_calibration_dataset(self.modele, [self.non])

    def test_carte_separable(self):
        agent = AgentCalibration()
        jeu = [CalibrationExample(s, y) for s, y in [(0.1, 0), (0.2, 0), (0.7, 1), (0.8, 1)]]
        carte = agent.ajuster(jeu)
        self.assertGreater(agent.calibrer(carte, 0.75), agent.calibrer(carte, 0.15))


if __name__ == "__main__":
    unittest.main()
