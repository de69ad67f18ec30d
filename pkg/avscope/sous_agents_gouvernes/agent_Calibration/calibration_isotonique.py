#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Calibration isotonique des probabilités à l'écran.

Étiquettes : etiquettes_sur_ecran (contrats_interface), appliquée aux exemples de validation.

Ajustement : PAVA pondéré (sklearn IsotonicRegression), bornes [0, 1], extrapolation bloquée.
Une seule carte partagée par toutes les sources.
"""
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from sklearn.isotonic import IsotonicRegression

from avscope.base.contrats_interface import CalibrationExample, CalibrationMap
from avscope.base.erreurs import ErreurDonnees, ErreurES

ENTETE = "# avscope-calibration v1"
POIDS_MIN = 1e-12


def exemples_calibration(scores: np.ndarray, etiquettes: np.ndarray,
                         puissances: Optional[np.ndarray] = None) -> List[CalibrationExample]:
    """Un CalibrationExample par source ; poids = puissance estimée si fournie, sinon 1."""
    scores = np.clip(np.asarray(scores, dtype=np.float64), 0.0, 1.0)
    poids = np.ones_like(scores) if puissances is None else np.maximum(np.asarray(puissances, dtype=np.float64), POIDS_MIN)
    return [CalibrationExample(float(s), int(y), float(w)) for s, y, w in zip(scores, etiquettes, poids)]


def pava_isotonic_fit(exemples: Sequence[CalibrationExample]) -> CalibrationMap:
    if len(exemples) < 2:
        raise ErreurDonnees(f"pava_isotonic_fit: au moins 2 exemples requis ({len(exemples)} fournis)")
    scores = np.array([e.score for e in exemples], dtype=np.float64)
    etiquettes = np.array([e.label for e in exemples], dtype=np.float64)
    poids = np.array([e.weight for e in exemples], dtype=np.float64)

    regression = IsotonicRegression(y_min=0.0, y_max=1.0, increasing=True, out_of_bounds="clip")
    regression.fit(scores, etiquettes, sample_weight=poids)
    valeurs = np.clip(regression.y_thresholds_, 0.0, 1.0)
    return CalibrationMap(
        breakpoints=[float(b) for b in regression.X_thresholds_],
        values=[float(v) for v in np.maximum.accumulate(valeurs)],
    )


def calibrate(carte: CalibrationMap, y_hat) -> np.ndarray:
    return carte.appliquer(y_hat)


# ========================================
# FICHIER TEXTE
# ========================================

def ecrire_carte(carte: CalibrationMap, chemin: Union[str, Path]) -> Path:
    chemin = Path(chemin)
    lignes = [ENTETE] + [f"{b:.17g} {v:.17g}" for b, v in zip(carte.breakpoints, carte.values)]
    try:
        chemin.write_text("\n".join(lignes) + "\n", encoding="utf-8")
    except OSError as e:
        raise ErreurES(f"Écriture impossible de la calibration {chemin}: {e}", chemin=str(chemin)) from e
    return chemin


def lire_carte(chemin: Union[str, Path]) -> CalibrationMap:
    chemin = Path(chemin)
    try:
        lignes = chemin.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ErreurES(f"Calibration illisible {chemin}: {e}", chemin=str(chemin)) from e
    if not lignes or lignes[0].strip() != ENTETE:
        raise ErreurDonnees(f"{chemin}: en-tête '{ENTETE}' absent", chemin=str(chemin))

    points, valeurs = [], []
    for numero, ligne in enumerate(lignes[1:], start=2):
        if not ligne.strip():
            continue
        champs = ligne.split()
        try:
            if len(champs) != 2:
                raise ValueError(f"{len(champs)} colonnes")
            points.append(float(champs[0]))
            valeurs.append(float(champs[1]))
        except ValueError as e:
            raise ErreurDonnees(f"{chemin}:{numero}: ligne invalide ({e})", chemin=str(chemin)) from e
    try:
        return CalibrationMap(points, valeurs)
    except ValueError as e:
        raise ErreurDonnees(f"{chemin}: carte invalide ({e})", chemin=str(chemin)) from e
