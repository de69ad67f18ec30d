#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Agent Entraineur
Cible : avscope/sous_agents_gouvernes/agent_Entraineur/ (pas_entrainement.py + agent_Entraineur.py)
Objectif : gradient du pas joint contre les différences finies, reproductibilité bit à bit,
descente en pré-entraînement, caractéristiques gelées, journal CSV, reprise et arrêt sur NaN.
"""
import csv
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
import torch

from avscope.base.contrats_interface import ModeEntrainement, TypeClip
from avscope.base.erreurs import ErreurDonnees, ErreurNumerique
from avscope.moteurs.conteneur_avsc import lire_checkpoint
from avscope.moteurs.moteur_tenseur import GradientTape, backward, erreur_relative, finite_difference_gradient
from avscope.sous_agents_gouvernes.agent_Entraineur.agent_Entraineur import AgentEntraineur
from avscope.sous_agents_gouvernes.agent_Entraineur.pas_entrainement import (
    ReglagesEntrainement,
    calculer_pertes,
    creer_optimiseur,
    empiler_lot,
    parametres_entraines,
    tirer_indices,
    train_step,
)
from avscope.sous_agents_gouvernes.agent_Experience.config_experience import ExperimentConfig
from avscope.sous_agents_gouvernes.agent_Experience.modele_av import ModeleAV
from avscope.sous_agents_gouvernes.agent_Perception.caracteristiques import audio_features


def _config_micro(graine=0, dropout=0.0):
    return ExperimentConfig.depuis_dict({
        "experience": {"seed": graine},
        "donnees": {"sample_rate": 800, "fps": 4, "grid_h": 2, "grid_w": 2, "patch": 2},
        "modele": {"M": 2, "D": 8, "H": 2, "L": 1, "n_filters": 4, "kernel": 4, "dilations": [1],
                   "n_mels": 8, "dropout": dropout},
    })


def _exemples(modele, n=6, graine=0):
    rng = np.random.default_rng(graine)
    return [modele.perception.synthetiser(rng, TypeClip.NON, identifiant=f"ex-{i}") for i in range(n)]


# ========================================
# PAS D'ENTRAÎNEMENT
# ========================================

class TestPas(unittest.TestCase):
    def setUp(self):
        self.cfg = _config_micro()
        self.modele = ModeleAV(self.cfg)
        self.exemples = _exemples(self.modele)
        self.lot = empiler_lot(self.exemples[:2])

    def test_gradient_joint_contre_differences_finies(self):
        reglages = ReglagesEntrainement(classifier_grad_to_separator=True)
        params = self.modele.params

        def perte(_):
            with torch.no_grad():
                return float(calculer_pertes(self.modele, self.lot, ModeEntrainement.JOINT, reglages, training=False).totale)

        with GradientTape(params) as tape:
            totale = calculer_pertes(self.modele, self.lot, ModeEntrainement.JOINT, reglages, training=False).totale
        analytique = backward(tape, totale)
        noms = params.noms("sep/") + params.noms("tete/")
        numerique = finite_difference_gradient(perte, params, h=1e-5, noms=noms)
        erreurs = torch.cat([erreur_relative(analytique[n], numerique[n], plancher=1e-6).reshape(-1) for n in noms])
        self.assertGreaterEqual(float((erreurs < 1e-3).double().mean()), 0.99)

    def test_classifieur_detache_du_separateur_par_defaut(self):
        reglages = ReglagesEntrainement(weight_mixit=0.0)
        with GradientTape(self.modele.params) as tape:
            totale = calculer_pertes(self.modele, self.lot, ModeEntrainement.JOINT, reglages, training=False).totale
        gradients = backward(tape, totale)
        for nom in self.modele.params.noms("sep/"):
            self.assertEqual(float(gradients[nom].abs().sum()), 0.0, nom)
        self.assertGreater(float(gradients["tete/f_z/w"].abs().sum()), 0.0)

    def test_pas_reproductible_bit_a_bit(self):
        stores = []
        for _ in range(2):
            modele = ModeleAV(_config_micro(dropout=0.1))
            noms = parametres_entraines(modele.params, ModeEntrainement.JOINT)
            optim = creer_optimiseur(modele.params, noms, 1e-3)
            train_step(modele, self.lot, optim, noms, ModeEntrainement.JOINT, ReglagesEntrainement(), 0,
                       torch.Generator().manual_seed(4))
            stores.append(modele.params)
        self.assertTrue(stores[0].identique(stores[1]))

    def test_pretrain_ne_touche_que_le_separateur(self):
        avant = self.modele.params.copier()
        noms = parametres_entraines(self.modele.params, ModeEntrainement.PRETRAIN_SEPARATION)
        self.assertTrue(noms and all(n.startswith("sep/") for n in noms))
        optim = creer_optimiseur(self.modele.params, noms, 1e-3)
        pertes = train_step(self.modele, self.lot, optim, noms, ModeEntrainement.PRETRAIN_SEPARATION,
                            ReglagesEntrainement(), 0)
        self.assertIsNone(pertes.classifieur)
        modifies = {n for n in self.modele.params.noms() if not torch.equal(avant.brut(n), self.modele.params.brut(n))}
        self.assertTrue(modifies)
        self.assertTrue(all(n.startswith("sep/") for n in modifies), modifies)

    def test_caracteristiques_gelees(self):
        x1 = self.exemples[0].mom.on_screen_mix.samples
        sources = torch.as_tensor(np.stack([x1, 0.5 * x1]))
        avant = audio_features(sources, self.modele.cfg_features).data.clone()
        noms = parametres_entraines(self.modele.params, ModeEntrainement.JOINT)
        optim = creer_optimiseur(self.modele.params, noms, 1e-2)
        train_step(self.modele, self.lot, optim, noms, ModeEntrainement.JOINT, ReglagesEntrainement(), 0)
        self.assertTrue(torch.equal(avant, audio_features(sources, self.modele.cfg_features).data))

    def test_descente_en_pretrain(self):
        noms = parametres_entraines(self.modele.params, ModeEntrainement.PRETRAIN_SEPARATION)
        optim = creer_optimiseur(self.modele.params, noms, 1e-2)
        pertes = []
        for pas in range(200):
            lot = empiler_lot([self.exemples[i] for i in tirer_indices(0, pas, len(self.exemples), 2)])
            pertes.append(train_step(self.modele, lot, optim, noms, ModeEntrainement.PRETRAIN_SEPARATION,
                                     ReglagesEntrainement(), pas).valeurs()["mixit"])
        self.assertLess(np.mean(pertes[-20:]), np.mean(pertes[:20]))

    def test_lot_sans_mom_refuse(self):
        simple = self.modele.perception.synthetiser(np.random.default_rng(1), mom=False)
        with self.assertRaises(ErreurDonnees):
            empiler_lot([simple])
        with self.assertRaises(ErreurDonnees):
            empiler_lot([])


# ========================================
# BOUCLE (AgentEntraineur)
# ========================================

class TestBoucle(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dossier = Path(self.tmp.name)
        self.cfg = _config_micro()
        self.exemples = _exemples(ModeleAV(self.cfg))

    def tearDown(self):
        self.tmp.cleanup()

    @staticmethod
    def _lignes(chemin):
        with open(chemin, encoding="utf-8", newline="") as f:
            return list(csv.reader(f))

    def _agent(self, checkpoint_every=100):
        return AgentEntraineur(ReglagesEntrainement(learning_rate=1e-3, batch_size=2, checkpoint_every=checkpoint_every))

    def test_journal_une_ligne_par_pas(self):
        resultat = self._agent().entrainer(ModeleAV(self.cfg), self.exemples, ModeEntrainement.JOINT, 5, self.dossier)
        lignes = self._lignes(resultat.chemin_journal_pertes)
        self.assertEqual(lignes[0], ["pas", "mixit", "classifieur", "totale"])
        self.assertEqual(len(lignes) - 1, 5)
        self.assertTrue(Path(resultat.chemin_checkpoint).exists())
        self.assertEqual(lire_checkpoint(resultat.chemin_checkpoint)[2], 5)

    def test_reprise_rejoue_la_meme_suite(self):
        complet = self._agent().entrainer(ModeleAV(self.cfg), self.exemples, ModeEntrainement.JOINT, 4,
                                          self.dossier / "complet")
        partiel = self._agent().entrainer(ModeleAV(self.cfg), self.exemples, ModeEntrainement.JOINT, 2,
                                          self.dossier / "partiel")
        repris = self._agent().entrainer(ModeleAV(self.cfg), self.exemples, ModeEntrainement.JOINT, 4,
                                         self.dossier / "partiel", reprise=partiel.chemin_checkpoint)
        self.assertEqual(self._lignes(complet.chemin_journal_pertes), self._lignes(repris.chemin_journal_pertes))

    def test_nan_conserve_le_dernier_checkpoint(self):
        modele = ModeleAV(self.cfg)
        original = modele.mixit
        appels = {"n": 0}

        def mixit_nan(sources, x1, x2):
            codes, pertes = original(sources, x1, x2)
            appels["n"] += 1
            return codes, (pertes * float("nan") if appels["n"] > 3 else pertes)

        with patch.object(modele, "mixit", side_effect=mixit_nan):
            with self.assertRaises(ErreurNumerique):
                self._agent(checkpoint_every=2).entrainer(modele, self.exemples, ModeEntrainement.PRETRAIN_SEPARATION,
                                                          6, self.dossier)
        chemin = self.dossier / "checkpoint_pretrain_separation.avsc"
        self.assertEqual(lire_checkpoint(chemin)[2], 2)
        self.assertFalse(Path(str(chemin) + ".tmp").exists())
        self.assertEqual(len(self._lignes(self.dossier / "pertes_pretrain_separation.csv")) - 1, 3)


if __name__ == "__main__":
    unittest.main()
