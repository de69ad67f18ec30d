#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Agent Perception
Cible : avscope/sous_agents_gouvernes/agent_Perception/ (caracteristiques, synthese_av, jeu_donnees, agent)
Objectif : propriétés des caractéristiques figées, synchronie audio-vidéo par construction,
           déterminisme et aller-retour disque des jeux synthétiques.
"""
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
import torch

from avscope.base.contrats_interface import ConditionFond, ExempleAV, ModeCorrelation, TypeClip
from avscope.base.erreurs import ErreurConfiguration, ErreurES, ErreurForme
from avscope.sous_agents_gouvernes.agent_Perception.agent_Perception import AgentPerception
from avscope.sous_agents_gouvernes.agent_Perception.caracteristiques import (
    EPS_LOG,
    FeatureConfig,
    audio_features,
    log_mel,
    video_features,
)
from avscope.sous_agents_gouvernes.agent_Perception.jeu_donnees import (
    charger_split,
    ecrire_split,
    generer_split,
    lire_manifeste,
    lire_wav,
    verifier_compatibilite,
)
from avscope.sous_agents_gouvernes.agent_Perception.synthese_av import (
    SyntheseConfig,
    composer_exemple,
    rms_par_trame,
    synth_av_example,
)


class TestCaracteristiquesAudio(unittest.TestCase):
    def setUp(self):
        self.cfg = FeatureConfig(D=12, T=4, sample_rate=8000, n_mels=16, graine=3)
        self.sources = np.random.default_rng(0).standard_normal((3, 800))

    def test_silence_constant(self):
        mel = log_mel(np.zeros((2, 800)), 4, 8000, 16)
        self.assertEqual(tuple(mel.shape), (2, 4, 16))
        torch.testing.assert_close(mel, torch.full_like(mel, math.log(EPS_LOG)), atol=0, rtol=0)

    def test_renversement_temporel_permute_les_trames(self):
        direct = log_mel(self.sources, 4, 8000, 16)
        renverse = log_mel(self.sources[:, ::-1].copy(), 4, 8000, 16)
        torch.testing.assert_close(renverse, direct.flip(-2), atol=1e-9, rtol=1e-9)

    def test_determinisme_et_graine(self):
        a = audio_features(self.sources, self.cfg)
        b = audio_features(self.sources, self.cfg)
        self.assertTrue(torch.equal(a.data, b.data))
        autre = audio_features(self.sources, FeatureConfig(D=12, T=4, n_mels=16, graine=4))
        self.assertFalse(torch.equal(a.data, autre.data))

    def test_formes(self):
        z = audio_features(self.sources, self.cfg)
        self.assertEqual(z.shape, (("source", 3), ("time", 4), ("depth", 12)))
        lot = audio_features(np.stack([self.sources, self.sources]), self.cfg)
        self.assertEqual(lot.axes, ("batch", "source", "time", "depth"))
        torch.testing.assert_close(lot.data[1], z.data)

    def test_erreurs_de_trames(self):
        with self.assertRaises(ErreurForme):
            log_mel(np.zeros((1, 10)), 11)
        with self.assertRaises(ErreurForme):
            log_mel(np.zeros((1, 10)), 3)

    def test_gradient_fini_sur_silence(self):
        s = torch.zeros(2, 800, dtype=torch.float64, requires_grad=True)
        audio_features(s, self.cfg).data.sum().backward()
        self.assertTrue(bool(torch.isfinite(s.grad).all()))


class TestCaracteristiquesVideo(unittest.TestCase):
    def setUp(self):
        self.cfg = FeatureConfig(D=6, T=2, grid=(8, 8), graine=1)

    @staticmethod
    def _trames(cellule=None):
        frames = np.full((2, 32, 32, 3), 0.1)
        if cellule is not None:
            ligne, colonne = cellule
            frames[:, 4 * ligne:4 * ligne + 4, 4 * colonne:4 * colonne + 4, :] = 0.9
        return frames

    def test_g_vaut_64(self):
        z = video_features(self._trames(), self.cfg)
        self.assertEqual(z.shape, (("space", 64), ("time", 2), ("depth", 6)))

    def test_trame_uniforme(self):
        z = video_features(self._trames(), self.cfg).data
        torch.testing.assert_close(z, z[:1].expand_as(z), atol=1e-12, rtol=0)

    def test_translation_d_une_cellule(self):
        avant = video_features(self._trames((2, 3)), self.cfg).data
        apres = video_features(self._trames((2, 4)), self.cfg).data
        fond = video_features(self._trames(), self.cfg).data
        torch.testing.assert_close(apres[2 * 8 + 4], avant[2 * 8 + 3])
        torch.testing.assert_close(apres[2 * 8 + 3], fond[0])

    def test_erreurs(self):
        with self.assertRaises(ErreurForme):
            video_features(np.zeros((2, 30, 32, 3)), self.cfg)
        with self.assertRaises(ErreurForme):
            video_features(np.zeros((3, 32, 32, 3)), self.cfg)


class TestSynthese(unittest.TestCase):
    def setUp(self):
        self.cfg = SyntheseConfig(sample_rate=8000, clip_seconds=1.0, fps=16, max_onscreen_sources=3)

    def _luminosite(self, exemple: ExempleAV, cellule: int) -> np.ndarray:
        ligne, colonne = divmod(cellule, self.cfg.grid_w)
        p = self.cfg.patch
        return exemple.mom.video.frames[:, ligne * p:(ligne + 1) * p, colonne * p:(colonne + 1) * p, :].mean(axis=(1, 2, 3))

    def test_luminosite_proportionnelle_au_rms(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            exemple = synth_av_example(rng, self.cfg, TypeClip.SUR_ECRAN, nb_visibles=2)
            for k, cases in enumerate(exemple.verite.cellules):
                rms = rms_par_trame(exemple.verite.visibles[k], self.cfg.T)
                lum = self._luminosite(exemple, cases[0])
                actifs = rms > 0
                np.testing.assert_array_equal(lum[~actifs], 0.0)
                ratio = lum[actifs] / rms[actifs]
                self.assertLess(np.ptp(ratio) / ratio.max(), 1e-6)

    def test_mode_null_decorrele(self):
        cfg = SyntheseConfig(correlation=ModeCorrelation.NULL)
        exemple = synth_av_example(np.random.default_rng(2), cfg, TypeClip.SUR_ECRAN, nb_visibles=1)
        rms = rms_par_trame(exemple.verite.visibles[0], cfg.T)
        lum = self._luminosite(exemple, exemple.verite.cellules[0][0])
        actifs = (rms > 0) & (lum > 0)
        ratio = lum[actifs] / rms[actifs]
        self.assertGreater(np.ptp(ratio) / ratio.max(), 1e-3)

    def test_somme_des_composantes(self):
        rng = np.random.default_rng(5)
        for type_clip in TypeClip:
            exemple = synth_av_example(rng, self.cfg, type_clip)
            total = exemple.verite.visibles.sum(axis=0) + exemple.verite.hors_champ.sum(axis=0)
            np.testing.assert_allclose(total, exemple.mom.entree.samples, atol=1e-6)
            self.assertLessEqual(np.max(np.abs(exemple.mom.entree.samples)), 0.9 + 1e-6)

    def test_types_de_clip(self):
        rng = np.random.default_rng(6)
        sur = synth_av_example(rng, self.cfg, TypeClip.SUR_ECRAN, mom=False)
        self.assertGreater(sur.verite.visibles.shape[0], 0)
        self.assertEqual(sur.verite.hors_champ.shape[0], 0)
        self.assertIsNone(sur.mom.off_screen_mix)
        hors = synth_av_example(rng, self.cfg, TypeClip.HORS_ECRAN, mom=False)
        self.assertEqual(hors.verite.visibles.shape[0], 0)
        self.assertEqual(hors.verite.cellules, [])

    def test_determinisme(self):
        a = synth_av_example(np.random.default_rng(9), self.cfg)
        b = synth_av_example(np.random.default_rng(9), self.cfg)
        np.testing.assert_array_equal(a.mom.entree.samples, b.mom.entree.samples)
        np.testing.assert_array_equal(a.mom.video.frames, b.mom.video.frames)

    def test_config_invalide(self):
        with self.assertRaises(ErreurConfiguration):
            SyntheseConfig(sample_rate=8000, fps=3)
        with self.assertRaises(ErreurConfiguration):
            SyntheseConfig(grid_h=1, grid_w=1, max_onscreen_sources=2)


class TestJeuDonnees(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dossier = Path(self.tmp.name)
        self.cfg = SyntheseConfig(sample_rate=800, clip_seconds=1.0, fps=4, grid_h=2, grid_w=2, patch=2)

    def tearDown(self):
        self.tmp.cleanup()

    def _ecrire(self, split, n, graine=0, dossier=None):
        bruts = generer_split(self.cfg, split, n, graine, ConditionFond.OFFSCREEN)
        return bruts, ecrire_split(bruts, self.cfg, dossier or self.dossier, split, graine)

    def test_compte_et_identifiants_disjoints(self):
        _, train = self._ecrire("train", 5)
        _, test = self._ecrire("test", 4)
        self.assertEqual(len(train.exemples), 5)
        self.assertEqual(len(lire_manifeste(self.dossier / "test").exemples), 4)
        ids_train = {e.identifiant for e in train.exemples}
        ids_test = {e.identifiant for e in test.exemples}
        self.assertFalse(ids_train & ids_test)
        self.assertEqual(set(train.exemples[0].fonds), {"offscreen"})
        self.assertEqual(set(test.exemples[0].fonds), {"offscreen", "random"})

    def test_aller_retour_exact_en_float(self):
        bruts, _ = self._ecrire("test", 3)
        _, simples = charger_split(self.dossier / "test")
        _, moms = charger_split(self.dossier / "test" / "manifeste.json", "random")
        for brut, simple, mom in zip(bruts, simples, moms):
            attendu = composer_exemple(brut.identifiant, brut.premier, brut.fonds["random"], self.cfg)
            self.assertIsNone(simple.mom.off_screen_mix)
            np.testing.assert_array_equal(simple.mom.on_screen_mix.samples, attendu.mom.on_screen_mix.samples)
            np.testing.assert_array_equal(mom.mom.off_screen_mix.samples, attendu.mom.off_screen_mix.samples)
            np.testing.assert_array_equal(mom.verite.hors_champ, attendu.verite.hors_champ)
            np.testing.assert_array_equal(mom.mom.video.frames, attendu.mom.video.frames)
            self.assertEqual(mom.type_clip, brut.premier.type_clip)

    def test_meme_graine_memes_fichiers(self):
        autre = self.dossier / "bis"
        self._ecrire("validation", 3, graine=7)
        self._ecrire("validation", 3, graine=7, dossier=autre)
        for relatif in ("manifeste.json", "tenseurs.avsc", "audio/validation-00002_x2_random.wav"):
            self.assertEqual((self.dossier / "validation" / relatif).read_bytes(),
                             (autre / "validation" / relatif).read_bytes())

    def test_fond_absent_et_incompatibilite(self):
        self._ecrire("train", 2)
        with self.assertRaises(ErreurConfiguration):
            charger_split(self.dossier / "train", "random")
        manifeste = lire_manifeste(self.dossier / "train")
        with self.assertRaises(ErreurConfiguration):
            verifier_compatibilite(manifeste, SyntheseConfig())

    def test_erreurs_es(self):
        with self.assertRaises(ErreurES):
            lire_wav(self.dossier / "absent.wav")
        with self.assertRaises(ErreurES):
            lire_manifeste(self.dossier / "absent")
        with self.assertRaises(ErreurConfiguration):
            generer_split(self.cfg, "inconnu", 1, 0)


class TestAgentPerception(unittest.TestCase):
    def test_synthese_et_caracteristiques(self):
        synthese = SyntheseConfig()
        agent = AgentPerception(synthese, FeatureConfig(D=16, T=synthese.T, sample_rate=synthese.sample_rate))
        exemple = agent.synthetiser(np.random.default_rng(0), TypeClip.SUR_ECRAN)
        self.assertIsInstance(exemple, ExempleAV)
        sources = np.stack([exemple.mom.on_screen_mix.samples, exemple.mom.off_screen_mix.samples])
        z_a, z_v = agent.caracteristiques(sources, exemple.mom.video.frames)
        self.assertEqual(z_a.etendue("time"), z_v.etendue("time"))
        self.assertEqual(z_a.etendue("depth"), z_v.etendue("depth"))
        self.assertEqual(z_v.etendue("space"), 64)
        self.assertEqual(agent.stats_manager.obtenir_stat_specifique("exemples_synthetises"), 1)

    def test_generation_via_agent(self):
        synthese = SyntheseConfig(sample_rate=800, fps=4, grid_h=2, grid_w=2, patch=2)
        agent = AgentPerception(synthese, FeatureConfig(D=4, T=4, sample_rate=800, n_mels=8, grid=(2, 2)))
        with tempfile.TemporaryDirectory() as tmp:
            manifeste = agent.generer_jeu(tmp, "validation", 2, graine=1)
            self.assertEqual(len(manifeste.exemples), 2)
            _, exemples = agent.charger_jeu(Path(tmp) / "validation", "offscreen")
            self.assertTrue(all(e.mom.est_mom for e in exemples))


if __name__ == "__main__":
    unittest.main()
