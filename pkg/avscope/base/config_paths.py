#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Chemins racine et variables d'environnement du projet AVSCOPE.
Source de vérité unique pour ROOT_DIR, le dossier des journaux et le plafond de parallélisme.
"""
import os
from pathlib import Path

from avscope.base.erreurs import ErreurConfiguration

ROOT_DIR = Path(os.environ.get("AVSCOPE_RACINE", Path(__file__).resolve().parents[2]))
THREADS_DEFAUT = 4


def dossier_journaux() -> Path:
    """Dossier des journaux JSONL (surchargé par AVSCOPE_JOURNAUX, ex: <out>/journaux pour la CLI)."""
    surcharge = os.environ.get("AVSCOPE_JOURNAUX")
    if surcharge:
        return Path(surcharge)
    return ROOT_DIR / "journaux"


def nb_threads() -> int:
    """AVSCOPE_THREADS si défini (≥ 1), sinon min(4, nombre de cœurs)."""
    valeur = os.environ.get("AVSCOPE_THREADS", "").strip()
    if valeur:
        try:
            return max(1, int(valeur))
        except ValueError as e:
            raise ErreurConfiguration(f"AVSCOPE_THREADS invalide : {valeur!r}") from e
    return max(1, min(THREADS_DEFAUT, os.cpu_count() or 1))
