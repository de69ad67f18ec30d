#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Moteur Tenseur
Cible : avscope/moteurs/moteur_tenseur.py (+ conteneur_avsc.py)
Objectif : Valider les contrats de forme par rôle, les opérations avant contre des oracles
à boucles naïves, le déterminisme du ParameterStore et le gradient inverse contre les différences finies.
"""
import itertools
import tempfile
import unittest
from pathlib import Path

import numpy as np
import torch

from avscope.base.erreurs import ErreurDonnees, ErreurForme, ErreurParametre
from avscope.moteurs.conteneur_avsc import ecrire_checkpoint, ecrire_conteneur, lire_checkpoint, lire_conteneur
from avscope.moteurs.moteur_tenseur import (
    AxisRole,
    AxisTaggedTensor,
    GradientTape,
    ParameterStore,
    backward,
    concat,
    dense,
    dropout,
    erreur_relative,
    finite_difference_gradient,
    layer_norm,
    softmax_over_axes,
    tensor_inner_product,
)

A = AxisTaggedTensor
DEPTH = AxisRole.DEPTH


class TestAxisTaggedTensor(unittest.TestCase):
    def test_roles_dupliques_refuses(self):
        with self.assertRaises(ErreurForme):
            A(torch.zeros(2, 2, dtype=torch.float64), ("time", "time"))

    def test_rang_incoherent(self):
        with self.assertRaises(ErreurForme):
            A(torch.zeros(2, 3, dtype=torch.float64), ("time",))

    def test_enum_et_chaine_equivalents(self):
        t = A(torch.zeros(2, 3, dtype=torch.float64), (AxisRole.TIME, "depth"))
        self.assertEqual(t.axes, ("time", "depth"))
        self.assertEqual(t.etendue(DEPTH), 3)


class TestProduitScalaire(unittest.TestCase):
    def test_contraction_de_uns(self):
        Q = A(torch.ones(2, 3, dtype=torch.float64), ("q", "depth"))
        K = A(torch.ones(4, 3, dtype=torch.float64), ("k", "depth"))
        out = tensor_inner_product(Q, K, {DEPTH})
        self.assertEqual(out.axes, ("q", "k"))
        self.assertTrue(torch.equal(out.data, torch.full((2, 4), 3.0, dtype=torch.float64)))

    def test_poids_identite(self):
        alpha = A.depuis([[1, 0], [0, 1]], ("q", "pos"))
        V = A.depuis([[5], [7]], ("pos", "depth"))
        out = tensor_inner_product(alpha, V, {"pos"})
        self.assertEqual(out.axes, ("q", "depth"))
        np.testing.assert_array_equal(out.numpy(), [[5.0], [7.0]])

    def test_oracle_boucles_axes_alignes(self):
        rng = np.random.default_rng(0)
        z1 = rng.standard_normal((2, 2, 3))
        z2 = rng.standard_normal((2, 3))
        out = tensor_inner_product(A.depuis(z1, ("source", "time", "depth")), A.depuis(z2, ("time", "depth")), {DEPTH})
        self.assertEqual(out.axes, ("source", "time"))
        attendu = np.zeros((2, 2))
        for m, t, d in itertools.product(range(2), range(2), range(3)):
            attendu[m, t] += z1[m, t, d] * z2[t, d]
        np.testing.assert_allclose(out.numpy(), attendu, atol=1e-12)

    def test_axe_externe_prime(self):
        rng = np.random.default_rng(1)
        q = rng.standard_normal((3, 4))
        k = rng.standard_normal((5, 4))
        out = tensor_inner_product(A.depuis(q, ("time", "depth")), A.depuis(k, ("time", "depth")), {DEPTH}, {"time"})
        self.assertEqual(out.axes, ("time", "time'"))
        np.testing.assert_allclose(out.numpy(), q @ k.T, atol=1e-12)

    def test_oracle_aleatoire_petites_etendues(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            b, m, d = rng.integers(1, 6, size=3)
            z1 = rng.standard_normal((b, m, d))
            z2 = rng.standard_normal((m, d))
            out = tensor_inner_product(A.depuis(z1, ("batch", "source", "depth")), A.depuis(z2, ("source", "depth")), {"source"})
            self.assertEqual(out.axes, ("batch", "depth"))
            attendu = np.zeros((b, d))
            for i, j, k in itertools.product(range(b), range(m), range(d)):
                attendu[i, k] += z1[i, j, k] * z2[j, k]
            np.testing.assert_allclose(out.numpy(), attendu, atol=1e-12)

    def test_erreur_nomme_axe(self):
        Z1 = A(torch.zeros(2, 3, dtype=torch.float64), ("time", "depth"))
        Z2 = A(torch.zeros(4, 3, dtype=torch.float64), ("time", "depth"))
        with self.assertRaises(ErreurForme) as ctx:
            tensor_inner_product(Z1, Z2, {DEPTH})
        self.assertEqual(ctx.exception.axe, "time")

    def test_axe_reduction_absent(self):
        Z1 = A(torch.zeros(2, 3, dtype=torch.float64), ("time", "depth"))
        Z2 = A(torch.zeros(3,), ("depth",))
        with self.assertRaises(ErreurForme):
            tensor_inner_product(Z1, Z2, {"time"})


class TestSoftmax(unittest.TestCase):
    def test_symetrie(self):
        out = softmax_over_axes(A.depuis([0.0, 0.0], ("pos",)), {"pos"})
        np.testing.assert_array_equal(out.numpy(), [0.5, 0.5])

    def test_stabilite(self):
        out = softmax_over_axes(A.depuis([1000.0, 0.0], ("pos",)), {"pos"})
        self.assertTrue(out.est_fini())
        self.assertEqual(out.numpy()[0], 1.0)
        self.assertEqual(out.numpy()[1], 0.0)

    def test_somme_conjointe(self):
        rng = np.random.default_rng(3)
        out = softmax_over_axes(A.depuis(rng.standard_normal((3, 4)), ("a", "b")), {"a", "b"})
        self.assertAlmostEqual(float(out.data.sum()), 1.0, delta=1e-12)

    def test_tranches_somment_a_un_sur_formes_aleatoires(self):
        rng = np.random.default_rng(4)
        roles = ("batch", "source", "time", "time'")
        for _ in range(100):
            forme = tuple(int(n) for n in rng.integers(1, 5, size=4))
            t = A.depuis(rng.standard_normal(forme) * 10, roles)
            k = int(rng.integers(1, 4))
            axes = set(rng.choice(roles[1:], size=k, replace=False).tolist())
            out = softmax_over_axes(t, axes)
            sommes = out.somme(axes).data
            self.assertTrue(torch.allclose(sommes, torch.ones_like(sommes), atol=1e-9))
            self.assertTrue(bool((out.data >= 0).all()))

    def test_axes_vides(self):
        with self.assertRaises(ErreurForme):
            softmax_over_axes(A.depuis([1.0], ("pos",)), set())


class TestDenseEtNorme(unittest.TestCase):
    def setUp(self):
        self.params = ParameterStore(graine=7)

    def test_identite(self):
        self.params.declarer_dense("id", 3, 3)
        with torch.no_grad():
            self.params.brut("id/w").copy_(torch.eye(3, dtype=torch.float64))
        t = A.depuis(np.arange(6.0).reshape(2, 3), ("time", "depth"))
        np.testing.assert_array_equal(dense(self.params, "id", t, 3).numpy(), t.numpy())

    def test_affine_scalaire(self):
        self.params.declarer_dense("s", 1, 1)
        with torch.no_grad():
            self.params.brut("s/w").fill_(2.0)
            self.params.brut("s/b").fill_(1.0)
        out = dense(self.params, "s", A.depuis([[3.0]], ("time", "depth")), 1)
        self.assertEqual(out.numpy()[0, 0], 7.0)

    def test_oracle_matmul_axe_depth_interne(self):
        self.params.declarer_dense("r", 4, 2)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((3, 4, 5))
        out = dense(self.params, "r", A.depuis(x, ("source", "depth", "time")), 2)
        W = self.params.brut("r/w").detach().numpy()
        attendu = np.zeros((3, 2, 5))
        for m, j, t in itertools.product(range(3), range(2), range(5)):
            attendu[m, j, t] = sum(x[m, i, t] * W[i, j] for i in range(4))
        self.assertEqual(out.axes, ("source", "depth", "time"))
        np.testing.assert_allclose(out.numpy(), attendu, atol=1e-12)

    def test_parametre_manquant(self):
        with self.assertRaises(ErreurParametre):
            dense(self.params, "absent", A.depuis([[1.0]], ("time", "depth")), 1)

    def test_depth_incompatible(self):
        self.params.declarer_dense("d", 2, 2)
        with self.assertRaises(ErreurForme):
            dense(self.params, "d", A.depuis([[1.0, 2.0, 3.0]], ("time", "depth")), 2)

    def test_layer_norm_cas_manuels(self):
        self.params.declarer_norme("ln", 2)
        out = layer_norm(self.params, "ln", A.depuis([[1.0, 3.0], [4.0, 4.0]], ("time", "depth")))
        np.testing.assert_allclose(out.numpy()[0], [-1.0, 1.0], atol=1e-5)
        np.testing.assert_array_equal(out.numpy()[1], [0.0, 0.0])

    def test_layer_norm_moments(self):
        self.params.declarer_norme("ln", 16)
        with torch.no_grad():
            self.params.brut("ln/g").fill_(2.0)
            self.params.brut("ln/b").fill_(0.5)
        x = np.random.default_rng(6).standard_normal((5, 16)) * 3 + 1
        out = layer_norm(self.params, "ln", A.depuis(x, ("time", "depth"))).numpy()
        np.testing.assert_allclose(out.mean(axis=1), 0.5, atol=1e-9)
        np.testing.assert_allclose(out.std(axis=1), 2.0, atol=1e-4)


class TestDropoutEtConcat(unittest.TestCase):
    def test_identites(self):
        t = A.depuis(np.ones((4, 4)), ("a", "b"))
        self.assertIs(dropout(t, 0.0, None, True), t)
        self.assertIs(dropout(t, 0.5, None, False), t)

    def test_taux_invalide(self):
        with self.assertRaises(ErreurDonnees):
            dropout(A.depuis([1.0], ("a",)), 1.0, torch.Generator(), True)

    def test_loi_des_grands_nombres_et_reproductibilite(self):
        t = A.depuis(np.ones(100_000), ("a",))
        g1 = torch.Generator().manual_seed(11)
        g2 = torch.Generator().manual_seed(11)
        out1 = dropout(t, 0.5, g1, True)
        out2 = dropout(t, 0.5, g2, True)
        self.assertTrue(0.98 <= float(out1.data.mean()) <= 1.02)
        self.assertTrue(torch.equal(out1.data, out2.data))

    def test_concat_audio_video(self):
        audio = A(torch.randn(4, 16, 8, dtype=torch.float64), ("joint", "time", "depth"))
        video = A(torch.randn(64, 16, 8, dtype=torch.float64), ("joint", "time", "depth"))
        z = concat([audio, video], "joint")
        self.assertEqual(z.etendue("joint"), 68)
        self.assertTrue(torch.equal(z.tranche("joint", 0, 4).data, audio.data))
        self.assertTrue(torch.equal(z.tranche("joint", 4, 68).data, video.data))

    def test_concat_un_seul(self):
        t = A.depuis(np.ones((2, 3)), ("a", "b"))
        self.assertTrue(torch.equal(concat([t], "a").data, t.data))

    def test_concat_etendue_incompatible(self):
        with self.assertRaises(ErreurForme):
            concat([A.depuis(np.ones((2, 3)), ("a", "b")), A.depuis(np.ones((2, 4)), ("a", "b"))], "a")


class TestParameterStoreEtConteneur(unittest.TestCase):
    def _construire(self, graine, ordre):
        store = ParameterStore(graine)
        for nom in ordre:
            store.declarer_dense(nom, 3, 4)
        return store

    def test_determinisme_independant_de_l_ordre(self):
        s1 = self._construire(3, ["a", "b"])
        s2 = self._construire(3, ["b", "a"])
        for nom in ("a/w", "b/w"):
            self.assertTrue(torch.equal(s1.brut(nom), s2.brut(nom)))
        self.assertFalse(torch.equal(s1.brut("a/w"), self._construire(4, ["a"]).brut("a/w")))

    def test_nom_unique(self):
        store = self._construire(0, ["a"])
        with self.assertRaises(ErreurParametre):
            store.declarer("a/w", (3, 4))

    def test_aller_retour_bit_exact(self):
        store = self._construire(9, ["enc/layer0/sa/head0/q", "tete/f_z"])
        store.declarer("scalaire", (), init="uns")
        with tempfile.TemporaryDirectory() as d:
            chemin = Path(d) / "modele.avsc"
            store.sauvegarder(chemin)
            relu = ParameterStore.charger(chemin, graine=9)
            self.assertTrue(store.identique(relu))
            self.assertEqual(chemin.read_bytes()[:4], b"AVSC")

    def test_conteneur_corrompu(self):
        with tempfile.TemporaryDirectory() as d:
            chemin = Path(d) / "x.avsc"
            ecrire_conteneur(chemin, {"a": np.arange(6.0).reshape(2, 3)})
            contenu = chemin.read_bytes()
            chemin.write_bytes(contenu[:-3])
            with self.assertRaises(ErreurDonnees):
                lire_conteneur(chemin)
            chemin.write_bytes(b"XXXX" + contenu[4:])
            with self.assertRaises(ErreurDonnees):
                lire_conteneur(chemin)

    def test_checkpoint_separe_poids_et_etat(self):
        store = self._construire(5, ["sep/a"])
        etat = {"sep/a/w/exp_avg": np.ones((2, 2)), "sep/a/w/step": np.array(7.0)}
        with tempfile.TemporaryDirectory() as d:
            chemin = Path(d) / "ckpt.avsc"
            ecrire_checkpoint(chemin, store.valeurs(), etat, pas=12)
            self.assertFalse(Path(str(chemin) + ".tmp").exists())
            poids, etat_relu, pas = lire_checkpoint(chemin)
        self.assertEqual(pas, 12)
        self.assertEqual(sorted(poids), ["sep/a/b", "sep/a/w"])
        self.assertEqual(sorted(etat_relu), sorted(etat))
        np.testing.assert_array_equal(poids["sep/a/w"], store.brut("sep/a/w").detach().numpy())
        self.assertEqual(float(etat_relu["sep/a/w/step"]), 7.0)

    def test_charger_valeurs_prefixe(self):
        source = self._construire(1, ["sep/a", "enc/b"])
        cible = self._construire(2, ["sep/a", "enc/b"])
        n = cible.charger_valeurs(source.valeurs(), prefixe="sep/")
        self.assertEqual(n, 2)
        self.assertTrue(torch.equal(cible.brut("sep/a/w"), source.brut("sep/a/w")))
        self.assertFalse(torch.equal(cible.brut("enc/b/w"), source.brut("enc/b/w")))


class TestGradients(unittest.TestCase):
    def test_quadratique(self):
        store = ParameterStore()
        store.declarer("p", (1,), init="uns")
        with torch.no_grad():
            store.brut("p").fill_(3.0)
        with GradientTape(store) as tape:
            perte = (store.brut("p") ** 2).sum()
        grads = backward(tape, perte)
        self.assertEqual(float(grads["p"][0]), 6.0)

    def test_parametre_non_atteint(self):
        store = ParameterStore()
        store.declarer("p", (2,), init="uns")
        store.declarer("q", (2,), init="uns")
        with GradientTape(store) as tape:
            perte = store.brut("q").sum()
        grads = backward(tape, perte)
        self.assertTrue(torch.equal(grads["p"], torch.zeros(2, dtype=torch.float64)))

    def test_perte_non_scalaire(self):
        store = ParameterStore()
        store.declarer("p", (2,), init="uns")
        with GradientTape(store) as tape:
            perte = store.brut("p") * 2
        with self.assertRaises(ErreurForme):
            backward(tape, perte)

    def test_differences_finies_scalaires(self):
        store = ParameterStore()
        store.declarer("x", (1,), init="uns")
        with torch.no_grad():
            store.brut("x").fill_(3.0)
        g = finite_difference_gradient(lambda p: float(p.brut("x")[0] ** 2), store, h=1e-4)
        self.assertAlmostEqual(float(g["x"][0]), 6.0, delta=1e-7)
        with torch.no_grad():
            store.brut("x").fill_(0.0)
        g = finite_difference_gradient(lambda p: float(abs(p.brut("x")[0])), store, h=1e-4)
        self.assertEqual(float(g["x"][0]), 0.0)
        with self.assertRaises(ErreurDonnees):
            finite_difference_gradient(lambda p: 0.0, store, h=0.0)

    def test_composition_contre_differences_finies(self):
        """dense -> layer_norm -> softmax -> produit scalaire, toutes les opérations composées."""
        store = ParameterStore(graine=5)
        store.declarer_dense("f", 4, 4)
        store.declarer_norme("ln", 4)
        x = A(torch.randn(3, 4, dtype=torch.float64, generator=torch.Generator().manual_seed(0)), ("time", "depth"))

        def perte(p):
            h = layer_norm(p, "ln", dense(p, "f", x, 4))
            logits = tensor_inner_product(h, h, {DEPTH}, {"time"})
            alpha = softmax_over_axes(logits, {"time'"})
            sortie = tensor_inner_product(alpha, h.renommer({"time": "time'"}), {"time'"})
            return (sortie.data ** 2).mean()

        with GradientTape(store) as tape:
            valeur = perte(store)
        analytique = backward(tape, valeur)
        numerique = finite_difference_gradient(lambda p: float(perte(p)), store, h=1e-4)
        for nom in store.noms():
            self.assertLess(float(erreur_relative(analytique[nom], numerique[nom], plancher=1e-3).max()), 1e-4, nom)

    # ==========================================================================
    # Une opération à la fois : perte = Σ c·y + Σ y², c aléatoire fixé
    # ==========================================================================
    def _comparer(self, store, sortie):
        c = torch.randn(sortie(store).data.shape, dtype=torch.float64, generator=torch.Generator().manual_seed(9))

        def perte(p):
            y = sortie(p).data
            return (y * c).sum() + (y ** 2).sum()

        with GradientTape(store) as tape:
            valeur = perte(store)
        analytique = backward(tape, valeur)
        numerique = finite_difference_gradient(lambda p: float(perte(p)), store, h=1e-4)
        for nom in store.noms():
            erreur = float(erreur_relative(analytique[nom], numerique[nom], plancher=1e-3).max())
            self.assertLess(erreur, 1e-4, nom)

    def test_dense_contre_differences_finies(self):
        store = ParameterStore(graine=1)
        store.declarer_dense("f", 3, 2)
        x = A(torch.randn(4, 3, dtype=torch.float64, generator=torch.Generator().manual_seed(1)), ("time", "depth"))
        self._comparer(store, lambda p: dense(p, "f", x, 2))

    def test_layer_norm_contre_differences_finies(self):
        store = ParameterStore(graine=2)
        store.declarer_norme("ln", 5)
        store.declarer("x", (3, 5))
        self._comparer(store, lambda p: layer_norm(p, "ln", A(p.brut("x"), ("time", "depth"))))

    def test_softmax_contre_differences_finies(self):
        store = ParameterStore(graine=3)
        store.declarer("x", (3, 4), fan_in=1)
        self._comparer(store, lambda p: softmax_over_axes(A(p.brut("x"), ("time", "space")), {"space"}))

    def test_dropout_contre_differences_finies(self):
        store = ParameterStore(graine=4)
        store.declarer("x", (4, 5))

        def sortie(p):
            # même masque à chaque évaluation
            return dropout(A(p.brut("x"), ("time", "depth")), 0.3, torch.Generator().manual_seed(6), training=True)

        self._comparer(store, sortie)

    def test_concat_contre_differences_finies(self):
        store = ParameterStore(graine=5)
        store.declarer("a", (2, 3))
        store.declarer("b", (4, 3))
        self._comparer(
            store, lambda p: concat([A(p.brut("a"), ("time", "depth")), A(p.brut("b"), ("time", "depth"))], "time")
        )


if __name__ == "__main__":
    unittest.main()
