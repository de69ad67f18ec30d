#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Jeux de données synthétiques sur disque.

Arborescence d'un split :
    <dossier>/<split>/manifeste.json
    <dossier>/<split>/tenseurs.avsc          vidéo + composantes de vérité terrain
    <dossier>/<split>/audio/<id>_x1.wav
    <dossier>/<split>/audio/<id>_x2_<condition>.wav

Flux aléatoires : un Generator par split, graine [graine, indice du split] ; les identifiants
portent le nom du split et sont donc disjoints d'un split à l'autre.
Le split "train" ne contient que des exemples NOn avec le fond configuré ; "validation" et
"test" alternent clips sur-écran / hors-écran et stockent un fond par condition.
"""
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import soundfile as sf

from avscope.base.contrats_interface import (
    ConditionFond,
    CustomJSONEncoder,
    EntreeManifeste,
    ExempleAV,
    ManifesteJeu,
    MixtureOfMixtures,
    TypeClip,
    VeriteTerrain,
    VideoClip,
    Waveform,
)
from avscope.base.erreurs import ErreurConfiguration, ErreurDonnees, ErreurES
from avscope.moteurs.conteneur_avsc import ecrire_conteneur, lire_conteneur
from avscope.sous_agents_gouvernes.agent_Perception.synthese_av import (
    ClipSynthetique,
    SyntheseConfig,
    composer_exemple,
    synth_clip,
)

SPLITS = ("train", "validation", "test")
SIMPLE = "single"
NOM_MANIFESTE = "manifeste.json"
NOM_TENSEURS = "tenseurs.avsc"
SUBTYPES_WAV = ("FLOAT", "PCM_16")


@dataclass
class ExempleBrut:
    identifiant: str
    premier: ClipSynthetique
    fonds: Dict[str, ClipSynthetique]


# ========================================
# WAV
# ========================================

def ecrire_wav(chemin: Union[str, Path], onde: Waveform, subtype: str = "FLOAT") -> Path:
    chemin = Path(chemin)
    if subtype not in SUBTYPES_WAV:
        raise ErreurConfiguration(f"Sous-type WAV inconnu : {subtype} (attendus {SUBTYPES_WAV})")
    try:
        sf.write(str(chemin), onde.samples.astype(np.float32), onde.sample_rate, subtype=subtype)
    except (OSError, RuntimeError) as e:
        raise ErreurES(f"Écriture WAV impossible {chemin}: {e}", chemin=str(chemin)) from e
    return chemin


def lire_wav(chemin: Union[str, Path], sample_rate: Optional[int] = None) -> Waveform:
    chemin = Path(chemin)
    try:
        samples, sr = sf.read(str(chemin), dtype="float64", always_2d=False)
    except (OSError, RuntimeError) as e:
        raise ErreurES(f"Lecture WAV impossible {chemin}: {e}", chemin=str(chemin)) from e
    if samples.ndim != 1:
        raise ErreurDonnees(f"WAV non mono : {chemin} {samples.shape}", chemin=str(chemin))
    if sample_rate is not None and sr != sample_rate:
        raise ErreurConfiguration(f"{chemin}: {sr} Hz au lieu de {sample_rate} Hz", chemin=str(chemin))
    return Waveform(samples, sr)


# ========================================
# GÉNÉRATION
# ========================================

def _tirer_fond(rng: np.random.Generator, cfg: SyntheseConfig, condition: ConditionFond) -> ClipSynthetique:
    if condition == ConditionFond.OFFSCREEN:
        return synth_clip(rng, cfg, TypeClip.HORS_ECRAN)
    types = list(TypeClip)
    return synth_clip(rng, cfg, types[int(rng.integers(len(types)))])


def generer_split(cfg: SyntheseConfig, split: str, n: int, graine: int,
                  background: ConditionFond = ConditionFond.OFFSCREEN) -> List[ExempleBrut]:
    if split not in SPLITS:
        raise ErreurConfiguration(f"Split inconnu : {split} (attendus {SPLITS})")
    if n < 0:
        raise ErreurConfiguration(f"Nombre d'exemples négatif pour {split}: {n}")
    rng = np.random.default_rng([graine, SPLITS.index(split)])
    conditions = [ConditionFond(background)] if split == "train" else list(ConditionFond)

    exemples = []
    for i in range(n):
        if split == "train":
            premier = synth_clip(rng, cfg, TypeClip.NON)
        else:
            premier = synth_clip(rng, cfg, TypeClip.SUR_ECRAN if rng.random() < 0.5 else TypeClip.HORS_ECRAN)
        fonds = {c.value: _tirer_fond(rng, cfg, c) for c in conditions}
        exemples.append(ExempleBrut(f"{split}-{i:05d}", premier, fonds))
    return exemples


# ========================================
# PERSISTANCE
# ========================================

def ecrire_split(exemples: Sequence[ExempleBrut], cfg: SyntheseConfig, dossier: Union[str, Path],
                 split: str, graine: int, wav_subtype: str = "FLOAT") -> ManifesteJeu:
    racine = Path(dossier) / split
    try:
        (racine / "audio").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ErreurES(f"Création impossible de {racine}: {e}", chemin=str(racine)) from e

    tenseurs: Dict[str, np.ndarray] = {}
    entrees = []
    for brut in exemples:
        simple = composer_exemple(brut.identifiant, brut.premier, None, cfg)
        audio_x1 = f"audio/{brut.identifiant}_x1.wav"
        ecrire_wav(racine / audio_x1, simple.mom.on_screen_mix, wav_subtype)
        tenseurs[f"{brut.identifiant}/video"] = simple.mom.video.frames
        tenseurs[f"{brut.identifiant}/visibles"] = simple.verite.visibles
        tenseurs[f"{brut.identifiant}/hors_champ"] = simple.verite.hors_champ

        fonds = {}
        for condition, clip_fond in brut.fonds.items():
            mom = composer_exemple(brut.identifiant, brut.premier, clip_fond, cfg)
            fonds[condition] = f"audio/{brut.identifiant}_x2_{condition}.wav"
            ecrire_wav(racine / fonds[condition], mom.mom.off_screen_mix, wav_subtype)
            nb_premier = simple.verite.hors_champ.shape[0]
            tenseurs[f"{brut.identifiant}/fond/{condition}"] = mom.verite.hors_champ[nb_premier:]

        entrees.append(EntreeManifeste(
            identifiant=brut.identifiant,
            type_clip=brut.premier.type_clip.value,
            audio_x1=audio_x1,
            fonds=fonds,
            nb_visibles=int(simple.verite.visibles.shape[0]),
            nb_hors_champ=int(simple.verite.hors_champ.shape[0]),
            cellules=simple.verite.cellules,
        ))

    ecrire_conteneur(racine / NOM_TENSEURS, tenseurs)
    manifeste = ManifesteJeu(
        split=split, graine=graine, sample_rate=cfg.sample_rate, fps=cfg.fps,
        grid_h=cfg.grid_h, grid_w=cfg.grid_w, fichier_tenseurs=NOM_TENSEURS, exemples=entrees,
    )
    try:
        with open(racine / NOM_MANIFESTE, "w", encoding="utf-8") as f:
            json.dump(asdict(manifeste), f, ensure_ascii=False, indent=2, cls=CustomJSONEncoder)
    except OSError as e:
        raise ErreurES(f"Écriture du manifeste impossible dans {racine}: {e}", chemin=str(racine)) from e
    return manifeste


def lire_manifeste(chemin: Union[str, Path]) -> ManifesteJeu:
    chemin = Path(chemin)
    if chemin.is_dir():
        chemin = chemin / NOM_MANIFESTE
    try:
        with open(chemin, "r", encoding="utf-8") as f:
            return ManifesteJeu.depuis_dict(json.load(f))
    except OSError as e:
        raise ErreurES(f"Manifeste illisible {chemin}: {e}", chemin=str(chemin)) from e
    except (json.JSONDecodeError, TypeError) as e:
        raise ErreurDonnees(f"Manifeste invalide {chemin}: {e}", chemin=str(chemin)) from e


def verifier_compatibilite(manifeste: ManifesteJeu, cfg: SyntheseConfig) -> None:
    attendu = (cfg.sample_rate, cfg.fps, cfg.grid_h, cfg.grid_w)
    recu = (manifeste.sample_rate, manifeste.fps, manifeste.grid_h, manifeste.grid_w)
    if attendu != recu:
        raise ErreurConfiguration(
            f"Manifeste '{manifeste.split}' incompatible avec la config : "
            f"(sample_rate, fps, grid_h, grid_w) = {recu} au lieu de {attendu}"
        )


def charger_split(chemin: Union[str, Path], condition: str = SIMPLE) -> Tuple[ManifesteJeu, List[ExempleAV]]:
    """Recharge un split ; condition "single" → mélanges simples, sinon MoMs du fond demandé."""
    chemin = Path(chemin)
    racine = chemin if chemin.is_dir() else chemin.parent
    manifeste = lire_manifeste(chemin)
    tenseurs = lire_conteneur(racine / manifeste.fichier_tenseurs)

    exemples = []
    for entree in manifeste.exemples:
        x1 = lire_wav(racine / entree.audio_x1, manifeste.sample_rate)
        x2 = None
        hors_champ = tenseurs[f"{entree.identifiant}/hors_champ"]
        if condition != SIMPLE:
            if condition not in entree.fonds:
                raise ErreurConfiguration(
                    f"{entree.identifiant}: fond '{condition}' absent (disponibles : {sorted(entree.fonds)})"
                )
            x2 = lire_wav(racine / entree.fonds[condition], manifeste.sample_rate)
            hors_champ = np.concatenate([hors_champ, tenseurs[f"{entree.identifiant}/fond/{condition}"]])
        video = VideoClip(tenseurs[f"{entree.identifiant}/video"], manifeste.fps)
        verite = VeriteTerrain(tenseurs[f"{entree.identifiant}/visibles"], hors_champ, entree.cellules)
        exemples.append(ExempleAV(entree.identifiant, MixtureOfMixtures(x1, x2, video), TypeClip(entree.type_clip), verite))
    return manifeste, exemples
