#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Caractéristiques figées Z_A / Z_V (substitut déterministe des réseaux d'embedding).

Audio  : ŝ (…, M, T') → trames disjointes de T'/T échantillons, fenêtre de Hann symétrique,
         spectre de puissance, banc mel (librosa), log(x + 1e-8), projection fixe vers D.
Vidéo  : trames (…, T, H, W, C) → moyenne par cellule de la grille, G = gh·gw positions,
         projection fixe des canaux vers D.

Aucun paramètre appris : les projections sont tirées d'une graine et mises en cache.
Les deux sorties partagent T et D, ce qui garantit que pack_av accepte toujours la paire.
"""
import functools
import zlib
from dataclasses import dataclass
from typing import Tuple

import librosa
import numpy as np
import torch

from avscope.base.erreurs import ErreurConfiguration, ErreurForme
from avscope.moteurs.moteur_tenseur import DTYPE, AxisRole, AxisTaggedTensor

EPS_LOG = 1e-8

BATCH = AxisRole.BATCH.value
SOURCE = AxisRole.SOURCE.value
SPACE = AxisRole.SPACE.value
TIME = AxisRole.TIME.value
DEPTH = AxisRole.DEPTH.value


@dataclass(frozen=True)
class FeatureConfig:
    D: int = 64
    T: int = 16
    sample_rate: int = 8000
    n_mels: int = 32
    grid: Tuple[int, int] = (8, 8)
    graine: int = 0

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        if min(self.D, self.T, self.sample_rate, self.n_mels, *self.grid) < 1:
            raise ErreurConfiguration(f"FeatureConfig: valeurs positives attendues ({self})")


@functools.lru_cache(maxsize=16)
def _banc_mel(sample_rate: int, longueur_trame: int, n_mels: int) -> np.ndarray:
    return librosa.filters.mel(sr=sample_rate, n_fft=longueur_trame, n_mels=n_mels, dtype=np.float64)


@functools.lru_cache(maxsize=32)
def _projection(graine: int, nom: str, entree: int, sortie: int) -> np.ndarray:
    rng = np.random.default_rng([graine, zlib.crc32(nom.encode("utf-8"))])
    return rng.standard_normal((entree, sortie)) / np.sqrt(entree)


def log_mel(sources, T: int, sample_rate: int = 8000, n_mels: int = 32) -> torch.Tensor:
    """(…, M, T') → (…, M, T, n_mels). Différentiable si ŝ l'est."""
    s = torch.as_tensor(sources, dtype=DTYPE)
    longueur = s.shape[-1]
    if T < 1 or T > longueur:
        raise ErreurForme(f"audio_features: T={T} hors de [1, {longueur}] trames", axe=TIME)
    if longueur % T:
        raise ErreurForme(f"audio_features: T'={longueur} non divisible en {T} trames", axe=TIME)

    L = longueur // T
    trames = s.reshape(*s.shape[:-1], T, L) * torch.hann_window(L, periodic=False, dtype=DTYPE)
    spectre = torch.fft.rfft(trames, dim=-1)
    # |z|² via parties réelle/imaginaire : gradient fini en z = 0
    puissance = spectre.real ** 2 + spectre.imag ** 2
    banc = torch.as_tensor(_banc_mel(sample_rate, L, n_mels))
    return torch.log(puissance @ banc.T + EPS_LOG)


def audio_features(sources, cfg: FeatureConfig) -> AxisTaggedTensor:
    mel = log_mel(sources, cfg.T, cfg.sample_rate, cfg.n_mels)
    z = mel @ torch.as_tensor(_projection(cfg.graine, "audio", cfg.n_mels, cfg.D))
    axes = (SOURCE, TIME, DEPTH) if z.dim() == 3 else (BATCH, SOURCE, TIME, DEPTH)
    return AxisTaggedTensor(z, axes)


def pooling_grille(frames, grid: Tuple[int, int]) -> torch.Tensor:
    """(…, T, H, W, C) → (…, T, gh·gw, C), moyenne sur chaque cellule."""
    f = torch.as_tensor(frames, dtype=DTYPE)
    if f.dim() < 4:
        raise ErreurForme(f"video_features: trames (…, T, H, W, C) attendues, reçu {tuple(f.shape)}", axe=SPACE)
    *tete, T, H, W, C = f.shape
    gh, gw = grid
    if H % gh or W % gw:
        raise ErreurForme(f"video_features: image {H}×{W} non divisible en grille {gh}×{gw}", axe=SPACE)
    cellules = f.reshape(*tete, T, gh, H // gh, gw, W // gw, C).mean(dim=(-4, -2))
    return cellules.reshape(*tete, T, gh * gw, C)


def video_features(frames, cfg: FeatureConfig) -> AxisTaggedTensor:
    cellules = pooling_grille(frames, cfg.grid)
    if cellules.shape[-3] != cfg.T:
        raise ErreurForme(f"video_features: {cellules.shape[-3]} trames au lieu de T={cfg.T}", axe=TIME)
    z = cellules @ torch.as_tensor(_projection(cfg.graine, "video", cellules.shape[-1], cfg.D))
    if z.dim() == 3:
        return AxisTaggedTensor(z, (TIME, SPACE, DEPTH)).permuter((SPACE, TIME, DEPTH))
    return AxisTaggedTensor(z, (BATCH, TIME, SPACE, DEPTH)).permuter((BATCH, SPACE, TIME, DEPTH))
