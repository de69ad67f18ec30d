#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Agent Separation
Cible : avscope/sous_agents_gouvernes/agent_Separation/ (separateur.py, mixit.py, agent_Separation.py)
Objectif : cohérence de mélange, séparateur, énumération/oracle MixIT, pseudo-étiquettes et pertes.
"""
import itertools
import math
import unittest

import numpy as np
import torch

from avscope.base.contrats_interface import MixtureOfMixtures, SourceEstimates, VideoClip, Waveform
from avscope.base.erreurs import ErreurDonnees, ErreurForme
from avscope.moteurs.moteur_tenseur import ParameterStore
from avscope.sous_agents_gouvernes.agent_Separation.agent_Separation import AgentSeparation
from avscope.sous_agents_gouvernes.agent_Separation.mixit import (
    classifier_loss,
    codes_vers_etiquettes,
    enumerate_assignments,
    mixit_best_assignment,
    mixit_lot,
    negative_snr_loss,
    perte_snr_valeur,
    pseudo_labels,
)
from avscope.sous_agents_gouvernes.agent_Separation.separateur import (
    SeparateurConfig,
    declarer_separateur,
    mixture_consistency,
    separate,
)


class TestCoherence(unittest.TestCase):
    def test_exemple_manuel(self):
        out = mixture_consistency(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([2.0, 2.0]))
        np.testing.assert_array_equal(out, [[1.5, 1.0], [0.5, 1.0]])

    def test_mille_cas_aleatoires(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            M, T = rng.integers(1, 6), rng.integers(1, 20)
            s = rng.standard_normal((M, T))
            x = rng.standard_normal(T)
            une = mixture_consistency(s, x)
            np.testing.assert_allclose(une.sum(axis=0), x, atol=1e-9)
            np.testing.assert_allclose(mixture_consistency(une, x), une, atol=1e-12)

    def test_deja_coherent_et_torch(self):
        s = torch.randn(2, 3, 5, dtype=torch.float64)
        x = s.sum(-2)
        torch.testing.assert_close(mixture_consistency(s, x), s, atol=1e-12, rtol=0)

    def test_erreurs(self):
        with self.assertRaises(ErreurDonnees):
            mixture_consistency(np.zeros((0, 4)), np.zeros(4))
        with self.assertRaises(ErreurForme):
            mixture_consistency(np.zeros((2, 4)), np.zeros(5))


class TestSeparateur(unittest.TestCase):
    def setUp(self):
        self.cfg = SeparateurConfig(M=4, n_filters=8, kernel=16, dilations=(1, 2, 4, 8), longueur=803)
        self.params = ParameterStore(3)
        declarer_separateur(self.params, self.cfg)

    def test_sources_et_coherence(self):
        x = torch.randn(2, 803, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
        s = separate(self.params, x, self.cfg)
        self.assertEqual(tuple(s.shape), (2, 4, 803))
        self.assertLess(float((s.sum(1) - x).abs().max()), 1e-9)

    def test_entree_nulle(self):
        s = separate(self.params, torch.zeros(803, dtype=torch.float64), self.cfg)
        self.assertEqual(tuple(s.shape), (4, 803))
        self.assertTrue(torch.equal(s, torch.zeros_like(s)))

    def test_longueur_incorrecte(self):
        with self.assertRaises(ErreurForme):
            separate(self.params, torch.zeros(800, dtype=torch.float64), self.cfg)

    def test_agent(self):
        agent = AgentSeparation(self.cfg, self.params)
        x = Waveform(np.random.default_rng(1).standard_normal(803), 8000)
        estimations = agent.separer(x)
        self.assertIsInstance(estimations, SourceEstimates)
        np.testing.assert_allclose(estimations.sources.sum(axis=0), x.samples, atol=1e-9)

        video = VideoClip(np.zeros((1, 1, 1, 1)), 16)
        with self.assertRaises(ErreurDonnees):
            agent.assigner(estimations, MixtureOfMixtures(x, None, video))
        mom = MixtureOfMixtures(Waveform(x.samples / 2, 8000), Waveform(x.samples / 2, 8000), video)
        assignation, perte = agent.assigner(estimations, mom)
        self.assertEqual(assignation.matrice.shape, (2, 4))
        self.assertTrue(math.isfinite(perte))


class TestAssignations(unittest.TestCase):
    def test_nombres(self):
        self.assertEqual(len(enumerate_assignments(2)), 4)
        self.assertEqual(len(enumerate_assignments(4)), 16)
        for M in range(1, 9):
            assignations = enumerate_assignments(M)
            self.assertEqual(len(assignations), 2 ** M)
            for A in assignations:
                self.assertTrue(np.all(A.matrice.sum(axis=0) == 1))
        self.assertEqual([A.matrice.tolist() for A in enumerate_assignments(1)], [[[1], [0]], [[0], [1]]])

    def test_garde_explosion(self):
        with self.assertRaises(ErreurDonnees):
            enumerate_assignments(9)

    def test_codes(self):
        for code, A in enumerate(enumerate_assignments(3)):
            self.assertEqual(A.code, code)


class TestPertes(unittest.TestCase):
    def setUp(self):
        self.ref = np.random.default_rng(0).standard_normal(64)

    def test_plancher(self):
        valeur, nulle = perte_snr_valeur(self.ref, self.ref)
        self.assertAlmostEqual(valeur, -30.0, places=9)
        self.assertFalse(nulle)

    def test_estimation_nulle(self):
        valeur, _ = perte_snr_valeur(self.ref, np.zeros(64))
        self.assertAlmostEqual(valeur, 10 * math.log10(1 + 1e-3), places=12)

    def test_monotonie_le_long_d_une_droite(self):
        depart = np.random.default_rng(1).standard_normal(64)
        valeurs = [perte_snr_valeur(self.ref, depart + t * (self.ref - depart))[0] for t in np.linspace(0, 1, 11)]
        self.assertTrue(all(b < a for a, b in zip(valeurs, valeurs[1:])))

    def test_reference_nulle(self):
        valeur, nulle = perte_snr_valeur(np.zeros(64), self.ref)
        self.assertEqual(valeur, 0.0)
        self.assertTrue(nulle)

    def test_gradient_fini_sur_reference_nulle(self):
        est = torch.randn(2, 64, dtype=torch.float64, requires_grad=True)
        ref = torch.stack([torch.zeros(64, dtype=torch.float64), torch.as_tensor(self.ref)])
        valeur, _ = negative_snr_loss(ref, est)
        valeur.sum().backward()
        self.assertTrue(bool(torch.isfinite(est.grad).all()))

    def test_entropie_croisee(self):
        self.assertLessEqual(float(classifier_loss([1.0, 0.0], [1.0, 0.0])), 1e-6)
        self.assertAlmostEqual(float(classifier_loss([1.0], [0.5])), math.log(2), places=12)
        grille = np.linspace(0.01, 0.99, 99)
        pertes = [float(classifier_loss([1.0, 0.0], [p, 1 - p])) for p in grille]
        self.assertEqual(int(np.argmin(pertes)), len(grille) - 1)


class TestMixIT(unittest.TestCase):
    @staticmethod
    def _partition_plantee(rng, M=4, T=64):
        while True:
            appartenance = rng.integers(0, 2, size=M)
            if 0 < appartenance.sum() < M:
                break
        s = rng.standard_normal((M, T))
        x1 = s[appartenance == 0].sum(axis=0)
        x2 = s[appartenance == 1].sum(axis=0)
        return s, x1, x2, appartenance

    def test_oracle_mille_partitions(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            s, x1, x2, appartenance = self._partition_plantee(rng)
            A, total = mixit_best_assignment(s, x1, x2)
            np.testing.assert_array_equal(A.matrice[1], appartenance)
            np.testing.assert_array_equal(pseudo_labels(A), 1 - appartenance)
            self.assertAlmostEqual(total, -60.0, places=6)

    def test_force_brute_independante_m2(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            s = rng.standard_normal((2, 32))
            x1, x2 = rng.standard_normal(32), rng.standard_normal(32)
            meilleure_perte = math.inf
            for bits in itertools.product((0, 1), repeat=2):
                vers_x2 = np.array(bits[::-1])
                perte = (perte_snr_valeur(x1, s[vers_x2 == 0].sum(axis=0))[0]
                         + perte_snr_valeur(x2, s[vers_x2 == 1].sum(axis=0))[0])
                meilleure_perte = min(meilleure_perte, perte)
            A, total = mixit_best_assignment(s, x1, x2)
            self.assertAlmostEqual(total, meilleure_perte, places=9)
            self.assertAlmostEqual(
                sum(perte_snr_valeur(ref, A.matrice[i] @ s)[0] for i, ref in enumerate((x1, x2))), meilleure_perte, places=9
            )

    def test_echange_inverse_les_lignes(self):
        rng = np.random.default_rng(3)
        s, x1, x2, _ = self._partition_plantee(rng)
        A, _ = mixit_best_assignment(s, x1, x2)
        B, _ = mixit_best_assignment(s, x2, x1)
        np.testing.assert_array_equal(A.matrice[::-1], B.matrice)

    def test_egalite_plus_petit_code(self):
        s = np.zeros((3, 16))
        A, _ = mixit_best_assignment(s, np.ones(16), np.ones(16))
        self.assertEqual(A.code, 0)

    def test_lot_coherent_avec_exemple(self):
        rng = np.random.default_rng(5)
        cas = [self._partition_plantee(rng) for _ in range(4)]
        s = torch.as_tensor(np.stack([c[0] for c in cas]))
        x1 = torch.as_tensor(np.stack([c[1] for c in cas]))
        x2 = torch.as_tensor(np.stack([c[2] for c in cas]))
        codes, pertes = mixit_lot(s, x1, x2)
        etiquettes = codes_vers_etiquettes(codes, 4)
        for b, (sb, x1b, x2b, _) in enumerate(cas):
            A, total = mixit_best_assignment(sb, x1b, x2b)
            self.assertEqual(int(codes[b]), A.code)
            self.assertAlmostEqual(float(pertes[b]), total, places=9)
            np.testing.assert_array_equal(etiquettes[b].numpy(), pseudo_labels(A))

    def test_pseudo_etiquettes(self):
        A = enumerate_assignments(4)[0b1010]
        np.testing.assert_array_equal(pseudo_labels(A), [1, 0, 1, 0])
        tout_hors = enumerate_assignments(4)[0b1111]
        np.testing.assert_array_equal(pseudo_labels(tout_hors), [0, 0, 0, 0])


if __name__ == "__main__":
    unittest.main()
