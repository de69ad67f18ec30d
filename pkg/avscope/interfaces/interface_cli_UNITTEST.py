#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Test Unitaire: Interface CLI
Cible : avscope/interfaces/interface_cli.py
Objectif : codes de sortie par catégorie d'erreur, diagnostic sur stderr, banc minimal de bout en bout.
"""
import csv
import io
import os
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from unittest.mock import patch

from avscope.interfaces.interface_cli import main


def _executer(*argv):
    err, out = io.StringIO(), io.StringIO()
    with redirect_stderr(err), redirect_stdout(out):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class TestCodesDeSortie(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dossier = Path(self.tmp.name)
        self.env = patch.dict(os.environ, {"AVSCOPE_THREADS": "1"})
        self.env.start()

    def tearDown(self):
        self.env.stop()
        self.tmp.cleanup()

    def test_cle_de_configuration_inconnue(self):
        config = self.dossier / "mauvaise.yaml"
        config.write_text("configuration:\n  modele:\n    profondeur: 3\n", encoding="utf-8")
        code, _, err = _executer("synth-data", "--config", str(config), "--out", str(self.dossier / "sortie"))
        self.assertEqual(code, 2)
        self.assertTrue(err.startswith("[configuration]"))

    def test_configuration_absente(self):
        code, _, err = _executer("synth-data", "--config", str(self.dossier / "absente.yaml"),
                                 "--out", str(self.dossier / "sortie"))
        self.assertEqual(code, 3)
        self.assertIn("[entree_sortie]", err)

    def test_threads_invalide(self):
        with patch.dict(os.environ, {"AVSCOPE_THREADS": "beaucoup"}):
            code, _, err = _executer("bench-attention", "--out", str(self.dossier / "sortie"))
        self.assertEqual(code, 2)
        self.assertIn("AVSCOPE_THREADS", err)

    def test_banc_minimal(self):
        sortie = self.dossier / "sortie"
        code, out, _ = _executer(
            "bench-attention", "--out", str(sortie),
            "--M", "1", "--G", "2", "--T", "2", "--H", "1", "--D", "4",
            "--variants", "JOINT_SA", "SEP_SA",
        )
        self.assertEqual(code, 0)
        self.assertTrue((sortie / "journaux").is_dir())
        with open(sortie / "banc_attention.csv", encoding="utf-8", newline="") as f:
            lignes = list(csv.reader(f))
        self.assertEqual(len(lignes), 3)
        self.assertEqual([l[-1] for l in lignes[1:]], ["ok", "ok"])
        self.assertIn("JOINT_SA", out)

    def test_pretrained_hors_mode_joint(self):
        code, _, err = _executer("train", "--mode", "pretrain_separation",
                                 "--pretrained", str(self.dossier / "x.avsc"), "--out", str(self.dossier / "sortie"))
        self.assertEqual(code, 2)
        self.assertIn("--pretrained", err)


if __name__ == "__main__":
    unittest.main()
