#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Contrats d'interface & erreurs
Cible : avscope/base/contrats_interface.py, erreurs.py, config_paths.py
"""
import json
import os
import unittest
from unittest.mock import patch

import numpy as np

from avscope.base.config_paths import nb_threads
from avscope.base.contrats_interface import (
    CustomJSONEncoder,
    EncoderVariant,
    LigneMetriques,
    MetricsReport,
    ModeEntrainement,
)
from avscope.base.erreurs import (
    ErreurAVScope,
    ErreurConfiguration,
    ErreurDonnees,
    ErreurES,
    ErreurForme,
    ErreurNumerique,
    ErreurParametre,
)


# ========================================
# ENUMS & JSON
# ========================================

class TestEnums(unittest.TestCase):
    def test_enum_flexible(self):
        self.assertIs(EncoderVariant("sep_sa"), EncoderVariant.SEP_SA)
        self.assertIs(EncoderVariant("joint-cma"), EncoderVariant.JOINT_CMA)
        self.assertIs(ModeEntrainement("PRETRAIN_SEPARATION"), ModeEntrainement.PRETRAIN_SEPARATION)
        with self.assertRaises(ValueError):
            EncoderVariant("full")

    def test_encodeur_json(self):
        ligne = LigneMetriques("single", False, 0.5, on_si_snr_db=[1.0], nb_exemples={"total": 1})
        brut = json.dumps({"ligne": ligne, "v": EncoderVariant.SEP_SA, "x": np.float64(2.5),
                           "a": np.arange(3)}, cls=CustomJSONEncoder)
        relu = json.loads(brut)
        self.assertEqual(relu["v"], "SEP_SA")
        self.assertEqual(relu["x"], 2.5)
        self.assertEqual(relu["a"], [0, 1, 2])
        self.assertEqual(relu["ligne"]["on_si_snr_db"], [1.0])


# ========================================
# MÉTRIQUES
# ========================================

class TestLigneMetriques(unittest.TestCase):
    def test_resume(self):
        ligne = LigneMetriques("mom_offscreen", True, 0.75, on_si_snr_db=[1.0, 2.0, 6.0],
                               input_si_snr_db=[-3.0, 1.0])
        resume = ligne.resume()
        self.assertEqual(resume["on_si_snr_median_db"], 2.0)
        self.assertEqual(resume["on_si_snr_mean_db"], 3.0)
        self.assertEqual(resume["input_si_snr_median_db"], -1.0)
        self.assertIsNone(resume["osr_median_db"])

    def test_validation(self):
        with self.assertRaises(ValueError):
            LigneMetriques("single", False, 1.5)
        with self.assertRaises(ValueError):
            LigneMetriques("single", False, None, osr_db=[float("nan")])

    def test_rapport(self):
        brute, calibree = LigneMetriques("single", False, 0.6), LigneMetriques("single", True, 0.7)
        rapport = MetricsReport([brute, calibree], graine=0, variante="SEP_SA")
        self.assertIs(rapport.ligne("single", calibre=True), calibree)
        with self.assertRaises(KeyError):
            rapport.ligne("mom_random")
        with self.assertRaises(ValueError):
            MetricsReport([], graine=0, variante="SEP_SA")


# ========================================
# ERREURS & ENVIRONNEMENT
# ========================================

class TestErreurs(unittest.TestCase):
    def test_codes_et_categories(self):
        attendus = [
            (ErreurAVScope("x"), 1, "interne"),
            (ErreurConfiguration("x"), 2, "configuration"),
            (ErreurES("x"), 3, "entree_sortie"),
            (ErreurNumerique("x"), 4, "numerique"),
            (ErreurDonnees("x"), 5, "donnees"),
            (ErreurForme("x", axe="time"), 5, "donnees"),
            (ErreurParametre("x", nom="sep/w"), 5, "donnees"),
        ]
        for erreur, code, categorie in attendus:
            self.assertEqual(erreur.code, code)
            self.assertEqual(erreur.diagnostic(), f"[{categorie}] x")

    def test_compatibilite_builtins(self):
        self.assertIsInstance(ErreurES("x"), OSError)
        self.assertIsInstance(ErreurForme("x"), ValueError)
        self.assertIsInstance(ErreurParametre("x"), KeyError)
        self.assertEqual(ErreurForme("x", axe="space").axe, "space")
        self.assertEqual(str(ErreurParametre("absent", nom="tete/w")), "absent")


class TestThreads(unittest.TestCase):
    def test_variable_definie(self):
        with patch.dict(os.environ, {"AVSCOPE_THREADS": "3"}):
            self.assertEqual(nb_threads(), 3)
        with patch.dict(os.environ, {"AVSCOPE_THREADS": "0"}):
            self.assertEqual(nb_threads(), 1)

    def test_defaut_et_invalide(self):
        with patch.dict(os.environ, {"AVSCOPE_THREADS": ""}):
            self.assertTrue(1 <= nb_threads() <= 4)
        with patch.dict(os.environ, {"AVSCOPE_THREADS": "deux"}):
            with self.assertRaises(ErreurConfiguration):
                nb_threads()


if __name__ == "__main__":
    unittest.main()
