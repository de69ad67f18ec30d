#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: META Agent
Cible : avscope/base/META_agent.py (+ cognitive_logger.py, auditor_base.py)
Objectif : Valider l'injection de dépendances, l'instrumentation automatique (Stats),
le contrôle des sorties par l'auditor et le journal JSONL.
"""
import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from avscope.base.META_agent import AgentBase
from avscope.base.contrats_interface import StatsBase


class TestMetaAgentInstrumentation(unittest.TestCase):
    """Teste l'injection et le wrapping de la métaclasse."""

    def setUp(self):
        class AgentTest(AgentBase):
            def methode_succes(self):
                return "OK"

            def methode_echec(self):
                raise ValueError("Boom")

            def _methode_privee(self):
                return "Secret"

        self.agent = AgentTest(nom_agent="AgentTest")

    def test_injection_dependances(self):
        self.assertIsInstance(self.agent.stats_manager, StatsBase)
        self.assertTrue(hasattr(self.agent, "auditor"), "Auditor manquant")
        self.assertTrue(hasattr(self.agent, "logger"), "CognitiveLogger manquant")
        self.assertEqual(self.agent.nom, "AgentTest")

    def test_wrapping_succes(self):
        self.assertEqual(self.agent.methode_succes(), "OK")
        self.assertEqual(self.agent.stats_manager.appels_total, 1)
        self.assertEqual(self.agent.stats_manager.obtenir_stat_specifique("appels_methode_succes"), 1)
        self.assertGreaterEqual(self.agent.stats_manager.obtenir_stat_specifique("duree_ms_methode_succes"), 0.0)

    def test_wrapping_echec(self):
        with self.assertRaises(ValueError):
            self.agent.methode_echec()
        stats = self.agent.stats_manager.obtenir_statistiques()
        self.assertEqual(stats["erreurs_total"], 1)
        self.assertEqual(stats["taux_reussite"], 0.0)

    def test_methode_privee_non_instrumentee(self):
        self.assertEqual(self.agent._methode_privee(), "Secret")
        self.assertEqual(self.agent.stats_manager.appels_total, 0)


class TestContratsDeSortie(unittest.TestCase):
    def test_sortie_hors_contrat_non_bloquante(self):
        class AgentEvaluation(AgentBase):
            def produire(self, valeur):
                return self.valider_sortie(valeur)

        agent = AgentEvaluation()
        with patch.object(agent.logger, "log_warning") as avertir:
            self.assertEqual(agent.produire({"auc": 1.0}), {"auc": 1.0})
        avertir.assert_called_once()
        self.assertFalse(agent.auditor.valider_format_sortie([1, 2]))


class TestJournal(unittest.TestCase):
    def test_metrique_ecrite_en_jsonl(self):
        class AgentCalibration(AgentBase):
            pass

        with tempfile.TemporaryDirectory() as d, patch.dict(os.environ, {"AVSCOPE_JOURNAUX": d}):
            agent = AgentCalibration()
            agent.logger.log_metrique("calibration", {"points": 3, "valeur_max": 0.75}, pas=2)
            fichiers = list(Path(d).glob("session_*.jsonl"))
            self.assertEqual(len(fichiers), 1)
            evenements = [json.loads(l) for l in fichiers[0].read_text(encoding="utf-8").splitlines()]

        metriques = [e for e in evenements if e["type"] == "metrique"]
        self.assertEqual(len(metriques), 1)
        self.assertEqual(metriques[0]["valeurs"], {"points": 3, "valeur_max": 0.75})
        self.assertEqual(metriques[0]["pas"], 2)
        self.assertEqual(metriques[0]["agent"], "Calibration")

    def test_dossier_absent_console_seulement(self):
        class AgentCalibration(AgentBase):
            pass

        with tempfile.TemporaryDirectory() as d, patch.dict(os.environ, {"AVSCOPE_JOURNAUX": str(Path(d) / "absent")}):
            agent = AgentCalibration()
            agent.logger.info("rien sur disque")
            self.assertIsNone(agent.logger.log_file)
            self.assertFalse((Path(d) / "absent").exists())


if __name__ == "__main__":
    unittest.main()
