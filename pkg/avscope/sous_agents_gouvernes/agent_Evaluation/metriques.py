#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Métriques d'évaluation : SI-SNR, OSR, AUC-ROC pondérée par la puissance, MixIT*.
Toutes les valeurs en dB sont bornées à ±60.
"""
from typing import Optional, Tuple

import numpy as np
from sklearn.metrics import roc_auc_score

from avscope.base.contrats_interface import AssignmentMatrix, Waveform
from avscope.base.erreurs import ErreurDonnees, ErreurForme

CAP_DB = 60.0
EPS_OSR = 10.0 ** (-CAP_DB / 10.0)
PUISSANCE_MIN = 1e-12


def _signal(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def _memes_longueurs(a: np.ndarray, b: np.ndarray, operation: str) -> None:
    if a.shape != b.shape:
        raise ErreurForme(f"{operation}: longueurs {a.shape} et {b.shape}", axe="time")


def _db(numerateur: float, denominateur: float) -> float:
    if denominateur <= 0.0:
        return CAP_DB
    if numerateur <= 0.0:
        return -CAP_DB
    return float(np.clip(10.0 * np.log10(numerateur / denominateur), -CAP_DB, CAP_DB))


def si_snr_detaille(ref, est) -> Tuple[float, bool]:
    """Renvoie (SI-SNR en dB, drapeau estimation nulle)."""
    r, e = _signal(ref), _signal(est)
    _memes_longueurs(r, e, "si_snr")
    puissance_ref = float(r @ r)
    if puissance_ref == 0.0:
        raise ErreurDonnees("si_snr: référence nulle")
    if not np.any(e):
        return -CAP_DB, True
    alpha = float(e @ r) / puissance_ref
    cible = alpha * r
    erreur = cible - e
    return _db(float(cible @ cible), float(erreur @ erreur)), False


def si_snr(ref, est) -> float:
    return si_snr_detaille(ref, est)[0]


def osr(x_entree, x_on) -> float:
    """Réduction de puissance de x̂ᵒⁿ par rapport au mélange d'entrée."""
    x, on = _signal(x_entree), _signal(x_on)
    _memes_longueurs(x, on, "osr")
    puissance = float(x @ x)
    if puissance == 0.0:
        raise ErreurDonnees("osr: mélange d'entrée nul")
    return _db(puissance, max(float(on @ on), EPS_OSR * puissance))


def power_weighted_auc(scores, labels, puissances) -> Optional[float]:
    """
    P(un positif tiré au hasard dépasse un négatif), chaque exemple pondéré par sa puissance ;
    égalités comptées ½. None si une classe est absente (ou de poids nul).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    puissances = np.asarray(puissances, dtype=np.float64)
    if not scores.shape == labels.shape == puissances.shape:
        raise ErreurForme(
            f"power_weighted_auc: formes {scores.shape}, {labels.shape}, {puissances.shape}", axe="source"
        )
    if np.any(puissances < 0.0) or not np.all(np.isfinite(puissances)):
        raise ErreurDonnees("power_weighted_auc: puissances négatives ou non finies")
    if not np.isin(labels, (0, 1)).all():
        raise ErreurDonnees("power_weighted_auc: étiquettes non binaires")
    poids = np.maximum(puissances, PUISSANCE_MIN)
    if poids[labels == 1].sum() <= 0.0 or poids[labels == 0].sum() <= 0.0:
        return None
    return float(roc_auc_score(labels, scores, sample_weight=poids))


def mixit_star(sources, x1_ref, assignation: AssignmentMatrix) -> float:
    """SI-SNR de la ligne x₁ de l'assignation MixIT, indépendant de ŷ."""
    sources = np.asarray(sources, dtype=np.float64)
    if sources.shape[0] != assignation.matrice.shape[1]:
        raise ErreurForme(
            f"mixit_star: {sources.shape[0]} sources pour une assignation à {assignation.matrice.shape[1]} colonnes",
            axe="source",
        )
    return si_snr(x1_ref, assignation.matrice[0].astype(np.float64) @ sources)
