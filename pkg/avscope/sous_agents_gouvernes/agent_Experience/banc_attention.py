#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Banc de complexité des encodeurs : pic d'éléments α mesuré (CompteurAttention)
contre la forme fermée (pic_attendu), et durée d'un forward.
Une cellule dont le pic attendu dépasse `max_elements` est refusée sans être exécutée.
"""
import csv
import itertools
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import torch

from avscope.base.contrats_interface import EncoderVariant
from avscope.base.erreurs import ErreurConfiguration, ErreurES
from avscope.moteurs.moteur_attention import AttentionConfig, CompteurAttention
from avscope.moteurs.moteur_tenseur import DTYPE, AxisTaggedTensor, ParameterStore
from avscope.sous_agents_gouvernes.agent_Alignement.encodeurs_av import (
    AVFeaturePair,
    EncoderConfig,
    declarer_encodeur,
    encode,
    pic_attendu,
)

STATUT_OK = "ok"
STATUT_REFUS = "refuse"
STATUT_ECART = "ecart"
ENTETE_CSV = [
    "variante", "M", "G", "T", "H", "D",
    "pic_etape_attendu", "pic_tenseur_attendu", "pic_etape_mesure", "pic_tenseur_mesure",
    "duree_ms", "statut",
]


@dataclass(frozen=True)
class CelluleBanc:
    M: int
    G: int
    T: int
    H: int
    D: int

    def __post_init__(self):
        if min(self.M, self.G, self.T, self.H, self.D) < 1:
            raise ErreurConfiguration(f"CelluleBanc: tailles positives attendues ({self})")
        if self.D % self.H:
            raise ErreurConfiguration(f"CelluleBanc: D={self.D} non divisible par H={self.H}")


@dataclass
class MesureBanc:
    cellule: CelluleBanc
    variante: EncoderVariant
    attendu_etape: int
    attendu_tenseur: int
    mesure_etape: Optional[int] = None
    mesure_tenseur: Optional[int] = None
    duree_ms: Optional[float] = None

    @property
    def statut(self) -> str:
        if self.mesure_etape is None:
            return STATUT_REFUS
        if (self.mesure_etape, self.mesure_tenseur) != (self.attendu_etape, self.attendu_tenseur):
            return STATUT_ECART
        return STATUT_OK

    def ligne(self) -> List:
        c = self.cellule
        return [
            self.variante.value, c.M, c.G, c.T, c.H, c.D,
            self.attendu_etape, self.attendu_tenseur,
            "" if self.mesure_etape is None else self.mesure_etape,
            "" if self.mesure_tenseur is None else self.mesure_tenseur,
            "" if self.duree_ms is None else f"{self.duree_ms:.3f}",
            self.statut,
        ]


def grille_cellules(Ms: Iterable[int], Gs: Iterable[int], Ts: Iterable[int],
                    Hs: Iterable[int], Ds: Iterable[int]) -> List[CelluleBanc]:
    return [CelluleBanc(*valeurs) for valeurs in itertools.product(Ms, Gs, Ts, Hs, Ds)]


def grille_spatiale(G: int) -> Tuple[int, int]:
    """Grille h×w la plus carrée possible avec h·w = G."""
    h = max(d for d in range(1, math.isqrt(G) + 1) if G % d == 0)
    return h, G // h


def paire_aleatoire(cellule: CelluleBanc, graine: int = 0) -> AVFeaturePair:
    g = torch.Generator().manual_seed(graine)
    c = cellule
    audio = AxisTaggedTensor(torch.randn(c.M, c.T, c.D, dtype=DTYPE, generator=g), ("source", "time", "depth"))
    video = AxisTaggedTensor(torch.randn(c.G, c.T, c.D, dtype=DTYPE, generator=g), ("space", "time", "depth"))
    return AVFeaturePair(audio, video, grille_spatiale(c.G))


def mesurer_cellule(cellule: CelluleBanc, variante: EncoderVariant, max_elements: float,
                    graine: int = 0, blocks: int = 1) -> MesureBanc:
    variante = EncoderVariant(variante)
    attendu = pic_attendu(variante, cellule.M, cellule.G, cellule.T, cellule.H)
    mesure = MesureBanc(cellule, variante, attendu["etape"], attendu["tenseur"])
    if attendu["etape"] > max_elements:
        return mesure

    cfg = EncoderConfig(variant=variante, blocks=blocks,
                        attention=AttentionConfig(depth=cellule.D, heads=cellule.H, dropout=0.0))
    params = ParameterStore(graine)
    declarer_encodeur(params, cfg)
    pair = paire_aleatoire(cellule, graine)
    with CompteurAttention() as compteur, torch.no_grad():
        debut = time.perf_counter()
        encode(cfg, params, pair)
        mesure.duree_ms = (time.perf_counter() - debut) * 1000.0
    mesure.mesure_etape, mesure.mesure_tenseur = compteur.pic_etape, compteur.pic_tenseur
    return mesure


def ecrire_csv(mesures: Sequence[MesureBanc], chemin: Union[str, Path]) -> Path:
    chemin = Path(chemin)
    try:
        chemin.parent.mkdir(parents=True, exist_ok=True)
        with open(chemin, "w", encoding="utf-8", newline="") as f:
            ecrivain = csv.writer(f)
            ecrivain.writerow(ENTETE_CSV)
            ecrivain.writerows(m.ligne() for m in mesures)
    except OSError as e:
        raise ErreurES(f"Écriture du banc impossible {chemin}: {e}", chemin=str(chemin)) from e
    return chemin
