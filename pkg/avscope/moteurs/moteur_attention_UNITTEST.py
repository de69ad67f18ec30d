#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Moteur Attention
Cible : avscope/moteurs/moteur_attention.py
Objectif : attention à une tête, MHA contre un oracle à boucles, pooling attentionnel, compteur α.
"""
import math
import unittest

import numpy as np
import torch

from avscope.base.erreurs import ErreurConfiguration, ErreurForme
from avscope.moteurs.moteur_attention import (
    AttentionConfig,
    CompteurAttention,
    ajouter_encodage_temporel,
    attention,
    attentional_pooling,
    declarer_mha,
    encodage_temporel,
    etape_attention,
    multi_head_attention,
)
from avscope.moteurs.moteur_tenseur import AxisTaggedTensor as A
from avscope.moteurs.moteur_tenseur import ParameterStore, dense


def _softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def _mha_oracle(params, prefixe, q_pos, v_pos, heads):
    """Seconde implémentation : boucles explicites requête × tête."""
    W = {n: params.brut(n).detach().numpy() for n in params.noms(prefixe)}
    D = q_pos.shape[1]
    dh = D // heads
    sortie = np.zeros_like(q_pos)
    for i in range(q_pos.shape[0]):
        morceaux = []
        for h in range(heads):
            wq, bq = W[f"{prefixe}/head{h}/q/w"], W[f"{prefixe}/head{h}/q/b"]
            wv, bv = W[f"{prefixe}/head{h}/v/w"], W[f"{prefixe}/head{h}/v/b"]
            q = q_pos[i] @ wq + bq
            vals = v_pos @ wv + bv
            alpha = _softmax(np.array([vals[j] @ q for j in range(v_pos.shape[0])]) / math.sqrt(dh))
            morceaux.append(sum(alpha[j] * vals[j] for j in range(v_pos.shape[0])))
        sortie[i] = np.concatenate(morceaux) @ W[f"{prefixe}/out/w"] + W[f"{prefixe}/out/b"]
    return sortie


class TestAttentionConfig(unittest.TestCase):
    def test_invariants(self):
        with self.assertRaises(ErreurConfiguration):
            AttentionConfig(depth=10, heads=4)
        with self.assertRaises(ErreurConfiguration):
            AttentionConfig(attended_axes=())
        self.assertEqual(AttentionConfig(depth=64, heads=4).profondeur_tete, 16)


class TestAttentionUneTete(unittest.TestCase):
    def test_position_unique(self):
        rng = np.random.default_rng(0)
        Q = A.depuis(rng.standard_normal((3, 4)), ("querypos", "depth"))
        V = A.depuis(rng.standard_normal((1, 4)), ("time", "depth"))
        out = attention(Q, V, V, ["time"])
        self.assertEqual(out.axes, ("querypos", "depth"))
        np.testing.assert_allclose(out.numpy(), np.repeat(V.numpy(), 3, axis=0), atol=1e-12)

    def test_gram_orthonormal(self):
        D = 3
        I = A.depuis(np.eye(D), ("querypos", "depth"))
        K = A.depuis(np.eye(D), ("time", "depth"))
        out = attention(I, K, K, ["time"]).numpy()
        diag = math.exp(1 / math.sqrt(D)) / (math.exp(1 / math.sqrt(D)) + D - 1)
        hors = 1.0 / (math.exp(1 / math.sqrt(D)) + D - 1)
        attendu = np.full((D, D), hors) + np.eye(D) * (diag - hors)
        np.testing.assert_allclose(out, attendu, atol=1e-12)
        self.assertTrue(np.all(np.argmax(out, axis=1) == np.arange(D)))

    def test_contrat_de_forme(self):
        Q = A.depuis(np.ones((2, 4)), ("querypos", "depth"))
        V = A.depuis(np.ones((5, 4)), ("time", "depth"))
        self.assertEqual(attention(Q, V, V, ["time"]).shape, (("querypos", 2), ("depth", 4)))

    def test_axe_absent(self):
        Q = A.depuis(np.ones((2, 4)), ("querypos", "depth"))
        V = A.depuis(np.ones((5, 4)), ("time", "depth"))
        with self.assertRaises(ErreurForme):
            attention(Q, V, V, ["space"])


class TestMultiTetes(unittest.TestCase):
    def _store(self, cfg, prefixe="mha", graine=3):
        params = ParameterStore(graine)
        declarer_mha(params, cfg, prefixe)
        return params

    def test_une_tete_egale_attention_plus_dense(self):
        cfg = AttentionConfig(depth=8, heads=1)
        params = self._store(cfg)
        rng = np.random.default_rng(1)
        Q = A.depuis(rng.standard_normal((3, 8)), ("querypos", "depth"))
        V = A.depuis(rng.standard_normal((5, 8)), ("time", "depth"))
        mha = multi_head_attention(cfg, params, Q, V, ["time"], prefixe="mha")
        ref = dense(params, "mha/out", attention(Q, V, V, ["time"], params, "mha/head0"), 8)
        np.testing.assert_allclose(mha.numpy(), ref.numpy(), atol=1e-12)

    def test_formes_quatre_tetes(self):
        cfg = AttentionConfig(depth=64, heads=4)
        params = self._store(cfg)
        self.assertEqual(tuple(params.brut("mha/head2/q/w").shape), (64, 16))
        Z = A(torch.randn(2, 3, 64, dtype=torch.float64), ("source", "time", "depth"))
        out = multi_head_attention(cfg, params, Z, Z, ["time"])
        self.assertEqual(out.shape, (("source", 2), ("time", 3), ("depth", 64)))

    def test_oracle_boucles(self):
        cfg = AttentionConfig(depth=8, heads=2)
        params = self._store(cfg, graine=5)
        rng = np.random.default_rng(2)
        q = rng.standard_normal((3, 8))
        v = rng.standard_normal((5, 8))
        out = multi_head_attention(cfg, params, A.depuis(q, ("querypos", "depth")), A.depuis(v, ("time", "depth")), ["time"])
        np.testing.assert_allclose(out.numpy(), _mha_oracle(params, "mha", q, v, 2), atol=1e-10)

    def test_oracle_auto_attention_conjointe(self):
        """Axes attendus présents des deux côtés (joint, time) : copie primée côté clé."""
        cfg = AttentionConfig(depth=4, heads=2)
        params = self._store(cfg, graine=6)
        z = np.random.default_rng(3).standard_normal((3, 2, 4))
        Z = A.depuis(z, ("joint", "time", "depth"))
        out = multi_head_attention(cfg, params, Z, Z, ["joint", "time"])
        plat = z.reshape(6, 4)
        np.testing.assert_allclose(out.numpy(), _mha_oracle(params, "mha", plat, plat, 2).reshape(3, 2, 4), atol=1e-10)

    def test_equivariance_sources(self):
        cfg = AttentionConfig(depth=8, heads=2)
        params = self._store(cfg)
        Z = A(torch.randn(4, 3, 8, dtype=torch.float64), ("source", "time", "depth"))
        perm = torch.tensor([2, 0, 3, 1])
        out = multi_head_attention(cfg, params, Z, Z, ["time"])
        out_perm = multi_head_attention(cfg, params, A(Z.data[perm], Z.axes), A(Z.data[perm], Z.axes), ["time"])
        torch.testing.assert_close(out_perm.data, out.data[perm], atol=1e-12, rtol=0)

    def test_echelle_lineaire_biais_nuls(self):
        cfg = AttentionConfig(depth=8, heads=2)
        params = self._store(cfg)
        rng = np.random.default_rng(4)
        Q = A.depuis(rng.standard_normal((3, 8)), ("querypos", "depth"))
        V = A.depuis(np.tile(rng.standard_normal((1, 8)), (5, 1)), ("time", "depth"))
        base = multi_head_attention(cfg, params, Q, V, ["time"]).numpy()
        echelle = multi_head_attention(cfg, params, Q, V * 2.5, ["time"]).numpy()
        np.testing.assert_allclose(echelle, 2.5 * base, atol=1e-12)

    def test_cle_distincte(self):
        cfg = AttentionConfig(depth=8, heads=2, distinct_key_projection=True)
        params = self._store(cfg)
        self.assertIn("mha/head1/k/w", params)
        Z = A(torch.randn(3, 8, dtype=torch.float64), ("time", "depth"))
        self.assertTrue(multi_head_attention(cfg, params, Z, Z, ["time"]).est_fini())


class TestPooling(unittest.TestCase):
    def setUp(self):
        self.cfg = AttentionConfig(depth=64, heads=4)
        self.params = ParameterStore(1)
        declarer_mha(self.params, self.cfg, "enc/pool")

    def test_forme(self):
        Z = A(torch.randn(4, 16, 64, dtype=torch.float64), ("source", "time", "depth"))
        self.assertEqual(attentional_pooling(self.cfg, self.params, Z).shape, (("source", 4), ("depth", 64)))

    def test_temps_constant_equivaut_trame_unique(self):
        trame = torch.randn(4, 1, 64, dtype=torch.float64)
        constant = A(trame.expand(4, 7, 64).clone(), ("source", "time", "depth"))
        unique = A(trame, ("source", "time", "depth"))
        for requete in ("sum", "mean"):
            torch.testing.assert_close(
                attentional_pooling(self.cfg, self.params, constant, requete=requete).data,
                attentional_pooling(self.cfg, self.params, unique, requete=requete).data,
                atol=1e-9, rtol=0,
            )

    def test_temps_vide(self):
        with self.assertRaises(ErreurForme):
            attentional_pooling(self.cfg, self.params, A(torch.zeros(4, 0, 64, dtype=torch.float64), ("source", "time", "depth")))


class TestCompteur(unittest.TestCase):
    def test_comptage_et_etapes(self):
        cfg = AttentionConfig(depth=4, heads=2)
        params = ParameterStore(0)
        declarer_mha(params, cfg, "a")
        declarer_mha(params, cfg, "b")
        Z = A(torch.randn(5, 3, 4, dtype=torch.float64), ("joint", "time", "depth"))
        with CompteurAttention() as compteur:
            multi_head_attention(cfg, params, Z, Z, ["joint", "time"], prefixe="a")
            with etape_attention():
                multi_head_attention(cfg, params, Z, Z, ["time"], prefixe="a")
                multi_head_attention(cfg, params, Z, Z, ["time"], prefixe="b")
        self.assertEqual(compteur.tenseurs, [2 * 15 * 15, 2 * 5 * 9, 2 * 5 * 9])
        self.assertEqual(compteur.etapes, [450, 180])
        self.assertEqual(compteur.pic_etape, 450)


class TestEncodageTemporel(unittest.TestCase):
    def test_valeurs_initiales(self):
        pe = encodage_temporel(4, 6).numpy()
        np.testing.assert_array_equal(pe[0, 0::2], 0.0)
        np.testing.assert_array_equal(pe[0, 1::2], 1.0)

    def test_ajout_preserve_axes(self):
        Z = A(torch.zeros(2, 4, 6, dtype=torch.float64), ("source", "time", "depth"))
        out = ajouter_encodage_temporel(Z)
        self.assertEqual(out.axes, Z.axes)
        np.testing.assert_allclose(out.numpy()[1], encodage_temporel(4, 6).numpy())


if __name__ == "__main__":
    unittest.main()
