#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Synthèse d'exemples audio-visuels (substitut de bureau aux clips réels).

Un clip synthétique contient :
  - des sources VISIBLES : sons modulés en amplitude (tons purs ou bruit) dont l'enveloppe
    pilote aussi la luminosité de cellules dédiées de la grille vidéo (synchronie par construction) ;
  - des sources HORS-CHAMP : audibles, sans aucune trace dans la vidéo ;
  - des objets visuels muets (distracteurs) quand le clip n'a aucune source visible.

Mode de corrélation :
  - "perfect" : luminosité de la cellule ∝ RMS par trame de la source qui la pilote ;
  - "null"    : la vidéo est tirée de signaux indépendants de l'audio.

Une MoM associe le clip de premier plan (x₁, vidéo) à l'audio d'un second clip (x₂).
Toutes les composantes sont quantifiées en float32 pour que l'aller-retour WAV FLOAT soit exact.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from avscope.base.contrats_interface import (
    ExempleAV,
    ModeCorrelation,
    MixtureOfMixtures,
    TypeClip,
    VeriteTerrain,
    VideoClip,
    Waveform,
)
from avscope.base.erreurs import ErreurConfiguration

FREQ_MIN_HZ = 100.0
FREQ_MAX_HZ = 1500.0
LUMINOSITE_FOND = 0.05
LUMINOSITE_MAX = 0.95
CRETE_MAX = 0.9


@dataclass(frozen=True)
class SyntheseConfig:
    sample_rate: int = 8000
    clip_seconds: float = 1.0
    fps: int = 16
    grid_h: int = 8
    grid_w: int = 8
    patch: int = 4
    channels: int = 3
    max_onscreen_sources: int = 2
    max_offscreen_sources: int = 2
    correlation: ModeCorrelation = ModeCorrelation.PERFECT

    def __post_init__(self):
        object.__setattr__(self, "correlation", ModeCorrelation(self.correlation))
        if min(self.sample_rate, self.fps, self.grid_h, self.grid_w, self.patch, self.channels) < 1:
            raise ErreurConfiguration(f"SyntheseConfig: valeurs positives attendues ({self})")
        if self.max_onscreen_sources < 1 or self.max_offscreen_sources < 1:
            raise ErreurConfiguration("SyntheseConfig: au moins une source visible et une hors-champ possibles")
        if self.max_onscreen_sources > self.G:
            raise ErreurConfiguration(f"SyntheseConfig: {self.max_onscreen_sources} sources visibles pour G={self.G}")
        if self.T < 1 or self.longueur % self.T:
            raise ErreurConfiguration(
                f"SyntheseConfig: T'={self.longueur} échantillons non divisibles en T={self.T} trames"
            )

    @property
    def longueur(self) -> int:
        return int(round(self.clip_seconds * self.sample_rate))

    @property
    def T(self) -> int:
        return int(round(self.clip_seconds * self.fps))

    @property
    def G(self) -> int:
        return self.grid_h * self.grid_w


@dataclass
class ClipSynthetique:
    type_clip: TypeClip
    visibles: np.ndarray
    hors_champ: np.ndarray
    video: VideoClip
    cellules: List[List[int]] = field(default_factory=list)

    @property
    def composantes(self) -> np.ndarray:
        return np.concatenate([self.visibles, self.hors_champ], axis=0)

    @property
    def audio(self) -> np.ndarray:
        return self.composantes.sum(axis=0)


def _quantifier(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def rms_par_trame(signal: np.ndarray, T: int) -> np.ndarray:
    return np.sqrt(np.mean(np.asarray(signal).reshape(T, -1) ** 2, axis=1))


def _source(rng: np.random.Generator, cfg: SyntheseConfig) -> np.ndarray:
    """Porteuse (ton ou bruit) × enveloppe constante par trame, coupée aléatoirement."""
    t = np.arange(cfg.longueur) / cfg.sample_rate
    if rng.random() < 0.5:
        porteuse = np.sin(2 * np.pi * rng.uniform(FREQ_MIN_HZ, FREQ_MAX_HZ) * t + rng.uniform(0, 2 * np.pi))
    else:
        porteuse = rng.standard_normal(cfg.longueur) * 0.5
    enveloppe = rng.uniform(0.1, 1.0, cfg.T) * (rng.random(cfg.T) < 0.7)
    if not enveloppe.any():
        enveloppe[rng.integers(cfg.T)] = 1.0
    gain = rng.uniform(0.2, 0.5)
    return gain * porteuse * np.repeat(enveloppe, cfg.longueur // cfg.T)


def _sources(rng: np.random.Generator, cfg: SyntheseConfig, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, cfg.longueur))
    return np.stack([_source(rng, cfg) for _ in range(n)])


def _video(cfg: SyntheseConfig, pilotes: np.ndarray, cellules: List[List[int]]) -> VideoClip:
    """Chaque pilote k éclaire ses cellules avec une luminosité ∝ RMS par trame."""
    luminosite = np.full((cfg.T, cfg.G), LUMINOSITE_FOND)
    for signal, cases in zip(pilotes, cellules):
        rms = rms_par_trame(signal, cfg.T)
        echelle = LUMINOSITE_MAX / rms.max() if rms.max() > 0 else 0.0
        luminosite[:, cases] = (rms * echelle)[:, None]
    grille = luminosite.reshape(cfg.T, cfg.grid_h, cfg.grid_w)
    pixels = np.repeat(np.repeat(grille, cfg.patch, axis=1), cfg.patch, axis=2)
    frames = np.repeat(pixels[..., None], cfg.channels, axis=-1)
    return VideoClip(frames, cfg.fps)


def _tirer_cellules(rng: np.random.Generator, cfg: SyntheseConfig, n: int) -> List[List[int]]:
    """Cellules disjointes, une ou deux par objet."""
    libres = list(rng.permutation(cfg.G))
    cellules = []
    for _ in range(n):
        taille = 1 if len(libres) < 2 * n else int(rng.integers(1, 3))
        cellules.append(sorted(int(c) for c in libres[:taille]))
        libres = libres[taille:]
    return cellules


def synth_clip(rng: np.random.Generator, cfg: SyntheseConfig, type_clip: TypeClip = TypeClip.NON,
               nb_visibles: Optional[int] = None) -> ClipSynthetique:
    type_clip = TypeClip(type_clip)
    if type_clip == TypeClip.SUR_ECRAN:
        n_vis = nb_visibles or int(rng.integers(1, cfg.max_onscreen_sources + 1))
        n_hors = 0
    elif type_clip == TypeClip.HORS_ECRAN:
        n_vis = 0
        n_hors = int(rng.integers(1, cfg.max_offscreen_sources + 1))
    else:
        n_vis = nb_visibles if nb_visibles is not None else int(rng.integers(0, cfg.max_onscreen_sources + 1))
        n_hors = int(rng.integers(0, cfg.max_offscreen_sources + 1))
        if n_vis + n_hors == 0:
            n_hors = 1

    visibles = _sources(rng, cfg, n_vis)
    hors_champ = _sources(rng, cfg, n_hors)

    if n_vis and cfg.correlation == ModeCorrelation.PERFECT:
        pilotes = visibles
        cellules = _tirer_cellules(rng, cfg, n_vis)
    else:
        # Objets muets : distracteurs (pas de source visible) ou contrôle "null"
        n_objets = n_vis or int(rng.integers(1, cfg.max_onscreen_sources + 1))
        pilotes = _sources(rng, cfg, n_objets)
        cellules = _tirer_cellules(rng, cfg, n_objets)
    video = _video(cfg, pilotes, cellules)
    return ClipSynthetique(type_clip, visibles, hors_champ, video, cellules[:n_vis])


def _echelle(audio: np.ndarray) -> float:
    """Crête de chaque clip bornée à CRETE_MAX/2 : x₁ + x₂ reste dans [-CRETE_MAX, CRETE_MAX]."""
    crete = float(np.max(np.abs(audio))) if audio.size else 0.0
    return (CRETE_MAX / 2) / crete if crete > CRETE_MAX / 2 else 1.0


def composer_exemple(identifiant: str, premier: ClipSynthetique, fond: Optional[ClipSynthetique],
                     cfg: SyntheseConfig) -> ExempleAV:
    """x₁ = audio de `premier` (avec sa vidéo), x₂ = audio de `fond` ; fond None → mélange simple.
    x₁ ne dépend pas du fond choisi."""
    echelle = _echelle(premier.audio)
    visibles = _quantifier(premier.visibles * echelle)
    hors_premier = _quantifier(premier.hors_champ * echelle)
    x1 = Waveform(_quantifier(np.concatenate([visibles, hors_premier]).sum(axis=0)), cfg.sample_rate)

    composantes_fond = np.zeros((0, cfg.longueur))
    x2 = None
    if fond is not None:
        composantes_fond = _quantifier(fond.composantes * _echelle(fond.audio))
        x2 = Waveform(_quantifier(composantes_fond.sum(axis=0)), cfg.sample_rate)

    verite = VeriteTerrain(
        visibles=visibles,
        hors_champ=np.concatenate([hors_premier, composantes_fond]),
        cellules=premier.cellules,
    )
    return ExempleAV(identifiant, MixtureOfMixtures(x1, x2, premier.video), premier.type_clip, verite)


def synth_av_example(rng: np.random.Generator, cfg: SyntheseConfig, type_clip: TypeClip = TypeClip.NON,
                     nb_visibles: Optional[int] = None, mom: bool = True,
                     identifiant: str = "exemple") -> ExempleAV:
    """Tire un clip de premier plan et, si `mom`, un clip de fond quelconque pour x₂."""
    premier = synth_clip(rng, cfg, type_clip, nb_visibles)
    fond = synth_clip(rng, cfg, TypeClip.NON) if mom else None
    return composer_exemple(identifiant, premier, fond, cfg)
