#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Agent Alignement
Cible : avscope/sous_agents_gouvernes/agent_Alignement/ (encodeurs_av.py + agent_Alignement.py)
Objectif : Valider l'empaquetage AV, les blocs SA/CMA, les quatre encodeurs (formes, équivariance,
gradients, comptabilité mémoire) et la tête de décision à l'écran.
"""
import os
import unittest
from unittest.mock import MagicMock

import numpy as np
import torch

from avscope.base.contrats_interface import CalibrationMap, EncoderVariant, OnScreenDecision, SourceEstimates
from avscope.base.erreurs import ErreurConfiguration, ErreurForme
from avscope.moteurs.moteur_attention import AttentionConfig, CompteurAttention, multi_head_attention
from avscope.moteurs.moteur_tenseur import (
    AxisTaggedTensor as A,
    GradientTape,
    ParameterStore,
    backward,
    dense,
    erreur_relative,
    finite_difference_gradient,
    layer_norm,
)
from avscope.sous_agents_gouvernes.agent_Alignement.agent_Alignement import AgentAlignement
from avscope.sous_agents_gouvernes.agent_Alignement.encodeurs_av import (
    AVFeaturePair,
    EncoderConfig,
    cma_block,
    declarer_encodeur,
    encode,
    onscreen_estimate,
    onscreen_head,
    pack_av,
    pic_attendu,
    sa_block,
    _declarer_cma,
    _declarer_sa,
)

TESTS_LONGS = os.environ.get("AVSCOPE_TESTS_LONGS") == "1"


def _paire(M, G, T, D, graine=0, grille=None):
    g = torch.Generator().manual_seed(graine)
    audio = A(torch.randn(M, T, D, dtype=torch.float64, generator=g), ("source", "time", "depth"))
    video = A(torch.randn(G, T, D, dtype=torch.float64, generator=g), ("space", "time", "depth"))
    return AVFeaturePair(audio, video, grille or (1, G))


def _modele(variant, M=2, G=4, T=3, D=8, H=2, L=1, graine=1):
    cfg = EncoderConfig(variant=variant, blocks=L, attention=AttentionConfig(depth=D, heads=H, dropout=0.1))
    params = ParameterStore(graine)
    declarer_encodeur(params, cfg)
    return cfg, params


class TestPaire(unittest.TestCase):
    def test_t_incoherent(self):
        audio = A(torch.zeros(2, 3, 8, dtype=torch.float64), ("source", "time", "depth"))
        video = A(torch.zeros(4, 5, 8, dtype=torch.float64), ("space", "time", "depth"))
        with self.assertRaises(ErreurForme) as ctx:
            AVFeaturePair(audio, video, (2, 2))
        self.assertEqual(ctx.exception.axe, "time")

    def test_grille_incoherente(self):
        audio = A(torch.zeros(2, 3, 8, dtype=torch.float64), ("source", "time", "depth"))
        video = A(torch.zeros(4, 3, 8, dtype=torch.float64), ("space", "time", "depth"))
        with self.assertRaises(ErreurForme):
            AVFeaturePair(audio, video, (8, 8))

    def test_pack_forme_et_aller_retour(self):
        pair = _paire(4, 64, 2, 4, grille=(8, 8))
        Z = pack_av(pair)
        self.assertEqual(Z.shape, (("joint", 68), ("time", 2), ("depth", 4)))
        self.assertTrue(torch.equal(Z.tranche("joint", 0, 4).data, pair.audio.data))
        self.assertTrue(torch.equal(Z.tranche("joint", 4, 68).data, pair.video.data))
        self.assertEqual(pack_av(_paire(1, 1, 2, 4)).etendue("joint"), 2)

    def test_config_invalide(self):
        with self.assertRaises(ErreurConfiguration):
            EncoderConfig(blocks=0)
        self.assertEqual(EncoderConfig(variant="joint_cma").variant, EncoderVariant.JOINT_CMA)


class TestBlocs(unittest.TestCase):
    def setUp(self):
        self.cfg = AttentionConfig(depth=8, heads=2)
        self.params = ParameterStore(2)

    def _annuler_valeurs(self, prefixe):
        with torch.no_grad():
            for nom in self.params.noms(prefixe):
                if "/v/" in nom or nom.endswith("/out/b"):
                    self.params.brut(nom).zero_()

    def test_sa_sans_attention_egale_chemin_residuel(self):
        _declarer_sa(self.params, self.cfg, "b")
        self._annuler_valeurs("b")
        Z = A(torch.randn(3, 4, 8, dtype=torch.float64), ("joint", "time", "depth"))
        r = layer_norm(self.params, "b/ln1", Z)
        attendu = layer_norm(self.params, "b/ln2", dense(self.params, "b/f", r, 8)) + r
        for axes in (("joint", "time"), ("joint",), ("time",)):
            out = sa_block(self.cfg, self.params, "b", Z, axes)
            torch.testing.assert_close(out.data, attendu.data, atol=1e-12, rtol=0)

    def test_sa_position_unique(self):
        _declarer_sa(self.params, self.cfg, "b")
        Z = A(torch.randn(1, 1, 8, dtype=torch.float64), ("joint", "time", "depth"))
        out = sa_block(self.cfg, self.params, "b", Z, ("joint", "time"))
        self.assertEqual(out.shape, Z.shape)
        self.assertTrue(out.est_fini())

    def test_sa_gradient_contre_differences_finies(self):
        """Gradient de mean(Z') par rapport à tous les paramètres du bloc."""
        _declarer_sa(self.params, self.cfg, "b")
        Z = A(torch.randn(3, 4, 8, dtype=torch.float64, generator=torch.Generator().manual_seed(3)), ("joint", "time", "depth"))

        def perte(p):
            return sa_block(self.cfg, p, "b", Z, ("joint", "time")).data.mean()

        with GradientTape(self.params) as tape:
            valeur = perte(self.params)
        analytique = backward(tape, valeur)
        numerique = finite_difference_gradient(lambda p: float(perte(p)), self.params, h=1e-4)
        for nom in self.params.noms():
            erreur = float(erreur_relative(analytique[nom], numerique[nom], plancher=1e-3).max())
            self.assertLess(erreur, 1e-4, nom)

    def test_cma_formes(self):
        _declarer_cma(self.params, self.cfg, "c")
        pair = _paire(4, 16, 5, 8)
        A2, V2 = cma_block(self.cfg, self.params, "c", pair.audio, pair.video)
        self.assertEqual(A2.shape, pair.audio.shape)
        self.assertEqual(V2.shape, pair.video.shape)

    def test_cma_spatiale_egale_conjointe_si_t_egal_un(self):
        _declarer_cma(self.params, self.cfg, "c")
        pair = _paire(2, 4, 1, 8)
        conj = cma_block(self.cfg, self.params, "c", pair.audio, pair.video, ("space", "time"), ("source", "time"))
        sep = cma_block(self.cfg, self.params, "c", pair.audio, pair.video, ("space",), ("source",))
        for x, y in zip(conj, sep):
            torch.testing.assert_close(x.data, y.data, atol=1e-12, rtol=0)

    def test_video_constante_attention_uniforme(self):
        _declarer_cma(self.params, self.cfg, "c")
        video = A(torch.full((4, 3, 8), 0.7, dtype=torch.float64), ("space", "time", "depth"))
        sorties = []
        for graine in (0, 1):
            audio = _paire(2, 4, 3, 8, graine=graine).audio
            sorties.append(multi_head_attention(self.cfg, self.params, audio, video, ("space", "time"), prefixe="c/audio"))
        # la sortie ne dépend plus de la requête : α uniforme sur une vidéo constante
        torch.testing.assert_close(sorties[0].data, sorties[1].data, atol=1e-12, rtol=0)


class TestEncodeurs(unittest.TestCase):
    def test_formes_identiques(self):
        pair = _paire(2, 4, 3, 8)
        for variant in EncoderVariant:
            cfg, params = _modele(variant, L=2)
            z = encode(cfg, params, pair)
            self.assertEqual(z.shape, (("source", 2), ("depth", 8)), variant)

    def test_mauvaise_variante(self):
        from avscope.sous_agents_gouvernes.agent_Alignement.encodeurs_av import joint_sa_encode
        cfg, params = _modele(EncoderVariant.SEP_SA)
        with self.assertRaises(ErreurConfiguration):
            joint_sa_encode(cfg, params, _paire(2, 4, 3, 8))

    def test_equivariance_sources(self):
        pair = _paire(3, 4, 3, 8, graine=4)
        perm = torch.tensor([2, 0, 1])
        pair_perm = AVFeaturePair(A(pair.audio.data[perm], pair.audio.axes), pair.video, pair.grid)
        for variant in EncoderVariant:
            cfg, params = _modele(variant)
            y = onscreen_head(params, encode(cfg, params, pair)).data
            y_perm = onscreen_head(params, encode(cfg, params, pair_perm)).data
            torch.testing.assert_close(y_perm, y[perm], atol=1e-10, rtol=0, msg=str(variant))

    def test_batch_traverse_l_encodeur(self):
        g = torch.Generator().manual_seed(3)
        audio = A(torch.randn(2, 2, 3, 8, dtype=torch.float64, generator=g), ("batch", "source", "time", "depth"))
        video = A(torch.randn(2, 4, 3, 8, dtype=torch.float64, generator=g), ("batch", "space", "time", "depth"))
        for variant in EncoderVariant:
            cfg, params = _modele(variant)
            z = encode(cfg, params, AVFeaturePair(audio, video, (2, 2)))
            for b in range(2):
                seul = AVFeaturePair(A(audio.data[b], audio.axes[1:]), A(video.data[b], video.axes[1:]), (2, 2))
                attendu = encode(cfg, params, seul)
                torch.testing.assert_close(z.permuter(["batch", "source", "depth"]).data[b], attendu.data, atol=1e-10, rtol=0)

    def test_dropout_reproductible(self):
        cfg, params = _modele(EncoderVariant.SEP_SA)
        pair = _paire(2, 4, 3, 8)
        z1 = encode(cfg, params, pair, training=True, generateur=torch.Generator().manual_seed(5))
        z2 = encode(cfg, params, pair, training=True, generateur=torch.Generator().manual_seed(5))
        self.assertTrue(torch.equal(z1.data, z2.data))

    def test_gradients_contre_differences_finies(self):
        """Encodeur + tête + entropie croisée, (M=2, G=4, T=3, D=8, H=2, L=1)."""
        pair = _paire(2, 4, 3, 8, graine=7)
        y = torch.tensor([1.0, 0.0], dtype=torch.float64)
        for variant in EncoderVariant:
            cfg, params = _modele(variant, graine=11)

            def perte(p):
                y_hat = onscreen_head(p, encode(cfg, p, pair)).data
                return -(y * torch.log(y_hat) + (1 - y) * torch.log(1 - y_hat)).mean()

            with GradientTape(params) as tape:
                valeur = perte(params)
            analytique = backward(tape, valeur)
            numerique = finite_difference_gradient(lambda p: float(perte(p)), params, h=1e-4)
            erreurs = torch.cat([erreur_relative(analytique[n], numerique[n], plancher=1e-3).reshape(-1) for n in params.noms()])
            self.assertLess(float(erreurs.max()), 1e-4, str(variant))


class TestComplexite(unittest.TestCase):
    def _mesurer(self, variant, M, G, T, H):
        cfg, params = _modele(variant, M=M, G=G, T=T, D=4, H=H)
        with CompteurAttention() as compteur, torch.no_grad():
            encode(cfg, params, _paire(M, G, T, 4))
        return compteur

    def test_formes_fermees_sur_grille(self):
        for T in (2, 3, 4):
            for M, G in ((1, 1), (2, 2), (2, 4)):
                for H in (1, 2):
                    joint = self._mesurer(EncoderVariant.JOINT_SA, M, G, T, H)
                    sep = self._mesurer(EncoderVariant.SEP_SA, M, G, T, H)
                    self.assertEqual(joint.pic_etape, T * T * (M + G) ** 2 * H)
                    self.assertEqual(sep.pic_etape, max((M + G) * T * T * H, T * (M + G) ** 2 * H))
                    self.assertLess(sep.pic_etape, joint.pic_etape)
                    for variant in EncoderVariant:
                        mesure = self._mesurer(variant, M, G, T, H)
                        attendu = pic_attendu(variant, M, G, T, H)
                        self.assertEqual((mesure.pic_etape, mesure.pic_tenseur), (attendu["etape"], attendu["tenseur"]), variant)

    def test_valeurs_de_reference(self):
        self.assertEqual(pic_attendu(EncoderVariant.JOINT_SA, 4, 64, 16, 4)["etape"], 4_734_976)
        self.assertEqual(pic_attendu(EncoderVariant.SEP_SA, 4, 64, 16, 4)["etape"], 295_936)

    def test_cma_separable_borne(self):
        mesure = self._mesurer(EncoderVariant.SEP_CMA, 2, 4, 3, 2)
        self.assertLessEqual(mesure.pic_tenseur, max(2 * 9 * 2, 4 * 9 * 2, 2 * 4 * 3 * 2))

    @unittest.skipUnless(TESTS_LONGS, "AVSCOPE_TESTS_LONGS=1 requis")
    def test_taille_reelle_joint(self):
        mesure = self._mesurer(EncoderVariant.JOINT_SA, 4, 64, 16, 4)
        self.assertEqual(mesure.pic_etape, 4_734_976)


class TestTete(unittest.TestCase):
    def setUp(self):
        self.params = ParameterStore(0)
        self.params.declarer_dense("tete/f_z", 4, 1)
        self.z = A(torch.randn(3, 4, dtype=torch.float64), ("source", "depth"))

    def test_logit_nul_et_saturation(self):
        with torch.no_grad():
            self.params.brut("tete/f_z/w").zero_()
        self.assertTrue(torch.equal(onscreen_head(self.params, self.z).data, torch.full((3,), 0.5, dtype=torch.float64)))
        with torch.no_grad():
            self.params.brut("tete/f_z/b").fill_(40.0)
        y = onscreen_head(self.params, self.z).data
        self.assertTrue(bool(torch.isfinite(y).all()))
        self.assertAlmostEqual(float(y.min()), 1.0, places=12)

    def test_monotonie_elementaire(self):
        base = onscreen_head(self.params, self.z).data
        with torch.no_grad():
            self.params.brut("tete/f_z/w").fill_(1.0)
            self.params.brut("tete/f_z/b").zero_()
        z2 = self.z.data.clone()
        z2[1] += 1.0
        y1 = onscreen_head(self.params, self.z).data
        y2 = onscreen_head(self.params, A(z2, self.z.axes)).data
        self.assertGreater(float(y2[1]), float(y1[1]))
        self.assertTrue(torch.equal(y1[[0, 2]], y2[[0, 2]]))
        self.assertEqual(base.shape, (3,))

    def test_estimation_sur_ecran(self):
        s = np.random.default_rng(0).standard_normal((4, 10))
        np.testing.assert_array_equal(onscreen_estimate(np.array([1.0, 0, 0, 0]), s), s[0])
        np.testing.assert_allclose(onscreen_estimate(np.ones(4), s), s.sum(axis=0), atol=1e-12)
        np.testing.assert_array_equal(onscreen_estimate(np.zeros(4), s), np.zeros(10))
        with self.assertRaises(ErreurForme):
            onscreen_estimate(np.ones(3), s)


class TestAgentAlignement(unittest.TestCase):
    def test_decision_avec_et_sans_calibration(self):
        cfg, params = _modele(EncoderVariant.SEP_SA)
        agent = AgentAlignement(cfg, params)
        pair = _paire(2, 4, 3, 8)
        sources = SourceEstimates(np.random.default_rng(1).standard_normal((2, 16)), 8000)
        decision = agent.decider(pair, sources)
        self.assertIsInstance(decision, OnScreenDecision)
        np.testing.assert_allclose(
            decision.on_screen_waveform, decision.probabilities @ sources.sources, atol=1e-12
        )
        nulle = agent.decider(pair, sources, CalibrationMap([0.0, 1.0], [0.0, 0.0]))
        np.testing.assert_array_equal(nulle.on_screen_waveform, np.zeros(16))
        self.assertEqual(agent.stats_manager.obtenir_stat_specifique("decisions"), 2)

    def test_carte_hors_bornes_bornee_avant_estimation(self):
        cfg, params = _modele(EncoderVariant.JOINT_SA)
        agent = AgentAlignement(cfg, params)
        sources = SourceEstimates(np.random.default_rng(2).standard_normal((2, 16)), 8000)
        carte = MagicMock(spec=CalibrationMap)
        carte.appliquer.return_value = np.array([1.5, -0.5])
        decision = agent.decider(_paire(2, 4, 3, 8), sources, carte)
        np.testing.assert_array_equal(decision.probabilities, [1.0, 0.0])
        np.testing.assert_allclose(decision.on_screen_waveform, sources.sources[0], atol=1e-12)


if __name__ == "__main__":
    unittest.main()
