#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Conteneur binaire AVSC (checkpoints, caractéristiques, état de l'optimiseur).

Format :
    en-tête  : b"AVSC" + version u32
    records  : longueur du nom u32 + nom utf-8 + rang u32 + étendues u32[rang]
               + scalaires float64 little-endian (ordre C)
Toutes les valeurs entières sont little-endian. Aller-retour bit-exact.

Checkpoint : poids du modèle sous leur propre nom, état Adam sous "optim/<nom>/…",
numéro de pas sous "meta/pas". L'écriture passe par un fichier temporaire puis os.replace :
le dernier checkpoint valide n'est jamais tronqué.
"""
import os
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np
import torch

from avscope.base.erreurs import ErreurDonnees, ErreurES

MAGIC = b"AVSC"
VERSION = 1
PREFIXE_OPTIM = "optim/"
CLE_PAS = "meta/pas"

Tableau = Union[np.ndarray, torch.Tensor]


def _vers_numpy(valeur: Tableau) -> np.ndarray:
    if isinstance(valeur, torch.Tensor):
        valeur = valeur.detach().cpu().numpy()
    return np.ascontiguousarray(np.asarray(valeur, dtype="<f8"))


def ecrire_conteneur(chemin: Union[str, Path], tenseurs: Mapping[str, Tableau]) -> Path:
    chemin = Path(chemin)
    try:
        with open(chemin, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            for nom, valeur in tenseurs.items():
                tableau = _vers_numpy(valeur)
                nom_octets = nom.encode("utf-8")
                f.write(struct.pack("<I", len(nom_octets)))
                f.write(nom_octets)
                f.write(struct.pack("<I", tableau.ndim))
                if tableau.ndim:
                    f.write(struct.pack(f"<{tableau.ndim}I", *tableau.shape))
                f.write(tableau.tobytes(order="C"))
    except OSError as e:
        raise ErreurES(f"Écriture impossible du conteneur {chemin}: {e}", chemin=str(chemin)) from e
    return chemin


def _lire_exact(f, n: int, chemin: Path) -> bytes:
    octets = f.read(n)
    if len(octets) != n:
        raise ErreurDonnees(f"Conteneur tronqué : {chemin}", chemin=str(chemin))
    return octets


def lire_conteneur(chemin: Union[str, Path]) -> Dict[str, np.ndarray]:
    chemin = Path(chemin)
    if not chemin.exists():
        raise ErreurES(f"Conteneur introuvable : {chemin}", chemin=str(chemin))

    tenseurs: Dict[str, np.ndarray] = OrderedDict()
    with open(chemin, "rb") as f:
        if f.read(4) != MAGIC:
            raise ErreurDonnees(f"Magic AVSC absent : {chemin}", chemin=str(chemin))
        (version,) = struct.unpack("<I", _lire_exact(f, 4, chemin))
        if version != VERSION:
            raise ErreurDonnees(f"Version AVSC non supportée ({version}) : {chemin}", chemin=str(chemin))

        while True:
            entete = f.read(4)
            if not entete:
                break
            if len(entete) != 4:
                raise ErreurDonnees(f"Conteneur tronqué : {chemin}", chemin=str(chemin))
            (longueur_nom,) = struct.unpack("<I", entete)
            nom = _lire_exact(f, longueur_nom, chemin).decode("utf-8")
            (rang,) = struct.unpack("<I", _lire_exact(f, 4, chemin))
            forme = struct.unpack(f"<{rang}I", _lire_exact(f, 4 * rang, chemin)) if rang else ()
            nb = int(np.prod(forme)) if rang else 1
            donnees = np.frombuffer(_lire_exact(f, 8 * nb, chemin), dtype="<f8")
            tenseurs[nom] = donnees.reshape(forme).astype(np.float64)
    return tenseurs


# ========================================
# CHECKPOINTS
# ========================================

def ecrire_checkpoint(chemin: Union[str, Path], poids: Mapping[str, Tableau],
                      etat_optim: Optional[Mapping[str, Tableau]] = None, pas: int = 0) -> Path:
    chemin = Path(chemin)
    tenseurs: Dict[str, Tableau] = OrderedDict(poids)
    for nom, valeur in (etat_optim or {}).items():
        tenseurs[PREFIXE_OPTIM + nom] = valeur
    tenseurs[CLE_PAS] = np.array(float(pas))

    temporaire = chemin.with_name(chemin.name + ".tmp")
    ecrire_conteneur(temporaire, tenseurs)
    try:
        os.replace(temporaire, chemin)
    except OSError as e:
        raise ErreurES(f"Remplacement impossible du checkpoint {chemin}: {e}", chemin=str(chemin)) from e
    return chemin


def lire_checkpoint(chemin: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray], int]:
    """(poids, état de l'optimiseur sans le préfixe optim/, pas)."""
    tenseurs = lire_conteneur(chemin)
    pas = int(tenseurs.pop(CLE_PAS, np.array(0.0)))
    etat = OrderedDict((n[len(PREFIXE_OPTIM):], v) for n, v in tenseurs.items() if n.startswith(PREFIXE_OPTIM))
    poids = OrderedDict((n, v) for n, v in tenseurs.items() if not n.startswith(PREFIXE_OPTIM) and not n.startswith("meta/"))
    return poids, etat, pas
