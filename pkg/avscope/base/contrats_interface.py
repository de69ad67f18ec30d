#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Règles AVSCOPE:
Les agents importent leurs modules (moteurs, helpers) mais pas les autres agents.
AgentExperience importe tout le monde et injecte les dépendances.

CONTRATS D'INTERFACE STANDARDISÉS
=================================
Ce fichier est la source de vérité pour le vocabulaire et les structures
de données échangées entre les agents (formes d'onde, MoMs, assignations,
décisions à l'écran, calibration, rapports de métriques).

RÈGLES :
1. Ce fichier est la référence unique pour les Enums et les Dataclasses d'échange.
2. Chaque dataclass valide ses invariants dans __post_init__ (fail-fast).
3. Aucune dépendance vers torch ici : les contrats voyagent en numpy.
"""
import json
import unicodedata
from dataclasses import asdict, dataclass, field, is_dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from avscope.base.erreurs import ErreurDonnees


class FlexibleEnum(str, Enum):
    """Enum tolérant à la casse et aux accents ("sep_sa" -> SEP_SA)."""

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            def clean(text):
                return "".join(c for c in unicodedata.normalize("NFD", text)
                               if unicodedata.category(c) != "Mn").lower().strip().replace("-", "_")

            valeur_cherchee = clean(value)
            for member in cls:
                if clean(member.value) == valeur_cherchee or clean(member.name) == valeur_cherchee:
                    return member
        return None


# ========================================
# 1. ÉNUMÉRATIONS (Le Vocabulaire Strict)
# ========================================

class EncoderVariant(FlexibleEnum):
    JOINT_SA = "JOINT_SA"
    SEP_SA = "SEP_SA"
    JOINT_CMA = "JOINT_CMA"
    SEP_CMA = "SEP_CMA"


class ModeEntrainement(FlexibleEnum):
    PRETRAIN_SEPARATION = "pretrain_separation"  # MixIT seul (PT)
    JOINT = "joint"                              # MixIT + entropie croisée


class ConditionFond(FlexibleEnum):
    """Origine de l'audio de fond des MoMs d'évaluation/calibration."""
    OFFSCREEN = "offscreen"   # pool hors-écran uniquement
    RANDOM = "random"         # n'importe quel clip


class ModeCorrelation(FlexibleEnum):
    PERFECT = "perfect"  # la luminosité des cellules suit l'enveloppe des sources visibles
    NULL = "null"        # vidéo indépendante de l'audio (contrôle, AUC ~ 0.5)


class TypeClip(FlexibleEnum):
    NON = "non"                     # exemple d'entraînement "noisy-labeled on-screen"
    SUR_ECRAN = "on_screen_only"    # tout l'audio est visible
    HORS_ECRAN = "off_screen_only"  # rien de l'audio n'est visible


# ========================================
# 2. UTILITAIRES JSON
# ========================================

class CustomJSONEncoder(json.JSONEncoder):
    """Encodeur universel pour Dataclasses, Enums et scalaires numpy."""

    def default(self, o):
        if is_dataclass(o):
            return asdict(o)
        if isinstance(o, Enum):
            return o.value
        if isinstance(o, Path):
            return str(o)
        if isinstance(o, datetime):
            return o.isoformat()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        return super().default(o)


# ========================================
# 3. SIGNAUX (Atomes audio / vidéo)
# ========================================

@dataclass
class Waveform:
    """Forme d'onde mono x ∈ R^{T'}."""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"❌ Waveform: attendu 1 dimension, reçu {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("❌ Waveform: échantillons non finis (NaN/Inf)")
        if self.sample_rate <= 0:
            raise ValueError(f"❌ Waveform: sample_rate invalide ({self.sample_rate})")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def puissance(self) -> float:
        return float(np.sum(self.samples ** 2))


@dataclass
class VideoClip:
    """Trames synthétiques T × grid_h·patch × grid_w·patch × canaux, valeurs dans [0, 1]."""
    frames: np.ndarray
    frame_rate: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 4:
            raise ValueError(f"❌ VideoClip: attendu (T, H, W, C), reçu {self.frames.shape}")
        if self.frames.size and (self.frames.min() < 0.0 or self.frames.max() > 1.0):
            raise ValueError("❌ VideoClip: valeurs hors de [0, 1]")
        if self.frame_rate <= 0:
            raise ValueError(f"❌ VideoClip: frame_rate invalide ({self.frame_rate})")


@dataclass
class VeriteTerrain:
    """
    Composantes synthétiques d'un exemple.
    visibles : sources du premier clip dont l'objet est à l'écran.
    hors_champ : sources audibles mais invisibles (fond du premier clip + second clip).
    cellules : pour chaque source visible, les indices de cellules de la grille qu'elle éclaire.
    """
    visibles: np.ndarray
    hors_champ: np.ndarray
    cellules: List[List[int]] = field(default_factory=list)

    def __post_init__(self):
        self.visibles = np.asarray(self.visibles, dtype=np.float64)
        self.hors_champ = np.asarray(self.hors_champ, dtype=np.float64)
        if self.visibles.ndim != 2 or self.hors_champ.ndim != 2:
            raise ValueError("❌ VeriteTerrain: composantes attendues en (k, T')")
        if len(self.cellules) != self.visibles.shape[0]:
            raise ValueError("❌ VeriteTerrain: une liste de cellules par source visible")


@dataclass
class MixtureOfMixtures:
    """
    Unité d'entraînement / d'évaluation : x = x₁ + x₂.
    x₁ = audio du clip dont on a la vidéo ; x₂ = audio d'un autre clip (hors-écran synthétique).
    Un mélange simple est représenté par x₂ = None.
    """
    on_screen_mix: Waveform
    off_screen_mix: Optional[Waveform]
    video: VideoClip

    def __post_init__(self):
        if self.off_screen_mix is not None:
            if len(self.off_screen_mix) != len(self.on_screen_mix):
                raise ValueError("❌ MixtureOfMixtures: x₁ et x₂ de longueurs différentes")
            if self.off_screen_mix.sample_rate != self.on_screen_mix.sample_rate:
                raise ValueError("❌ MixtureOfMixtures: fréquences d'échantillonnage différentes")

    @property
    def est_mom(self) -> bool:
        return self.off_screen_mix is not None

    @property
    def entree(self) -> Waveform:
        if self.off_screen_mix is None:
            return self.on_screen_mix
        return Waveform(self.on_screen_mix.samples + self.off_screen_mix.samples,
                        self.on_screen_mix.sample_rate)


@dataclass
class ExempleAV:
    """Exemple complet : MoM (ou mélange simple), type du clip de premier plan et vérité terrain."""
    identifiant: str
    mom: MixtureOfMixtures
    type_clip: TypeClip
    verite: VeriteTerrain

    def __post_init__(self):
        if not self.identifiant:
            raise ValueError("❌ ExempleAV: identifiant vide")
        if not isinstance(self.type_clip, TypeClip):
            raise TypeError(f"❌ ExempleAV: type_clip doit être un TypeClip, reçu {type(self.type_clip)}")


# ========================================
# 4. FORMATS DE SORTIE PAR AGENT
# ========================================

@dataclass
class SourceEstimates:
    """SORTIE DE : AgentSeparation. M sources ŝ (M × T') sommant au mélange d'entrée."""
    sources: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.sources = np.asarray(self.sources, dtype=np.float64)
        if self.sources.ndim != 2 or self.sources.shape[0] == 0:
            raise ValueError(f"❌ SourceEstimates: attendu (M, T') avec M ≥ 1, reçu {self.sources.shape}")

    @property
    def nb_sources(self) -> int:
        return self.sources.shape[0]

    @property
    def puissances(self) -> np.ndarray:
        return np.sum(self.sources ** 2, axis=1)


@dataclass
class AssignmentMatrix:
    """A ∈ {0,1}^{2×M}, chaque colonne one-hot : chaque source va à exactement un mélange."""
    matrice: np.ndarray

    def __post_init__(self):
        self.matrice = np.asarray(self.matrice, dtype=np.int64)
        if self.matrice.ndim != 2 or self.matrice.shape[0] != 2:
            raise ValueError(f"❌ AssignmentMatrix: attendu (2, M), reçu {self.matrice.shape}")
        if not np.isin(self.matrice, (0, 1)).all():
            raise ValueError("❌ AssignmentMatrix: valeurs non binaires")
        if not np.all(self.matrice.sum(axis=0) == 1):
            raise ValueError("❌ AssignmentMatrix: chaque colonne doit sommer à 1")

    @property
    def code(self) -> int:
        """Encodage binaire : bit m = 1 si la source m va au second mélange."""
        return int(sum(int(b) << m for m, b in enumerate(self.matrice[1])))


@dataclass
class OnScreenDecision:
    """SORTIE DE : AgentAlignement. ŷ ∈ [0,1]^M et x̂ᵒⁿ = Σ_m ŷ_m ŝ_m."""
    probabilities: np.ndarray
    on_screen_waveform: np.ndarray

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=np.float64)
        if np.any(self.probabilities < 0.0) or np.any(self.probabilities > 1.0):
            raise ValueError("❌ OnScreenDecision: probabilités hors de [0, 1]")


@dataclass
class CalibrationExample:
    score: float
    label: int
    weight: float = 1.0

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"❌ CalibrationExample: label doit être 0 ou 1, reçu {self.label}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"❌ CalibrationExample: score hors de [0, 1] ({self.score})")
        if self.weight <= 0.0:
            raise ValueError(f"❌ CalibrationExample: poids non positif ({self.weight})")


@dataclass
class CalibrationMap:
    """
    Application monotone non décroissante [0,1] -> [0,1].
    Interpolation linéaire entre points de rupture, extrapolation bloquée aux extrémités.
    """
    breakpoints: List[float]
    values: List[float]
    interpolation: str = "lineaire"

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values) or not self.breakpoints:
            raise ValueError("❌ CalibrationMap: breakpoints et values doivent être non vides et de même taille")
        if any(b2 < b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("❌ CalibrationMap: breakpoints non triés")
        if any(v2 < v1 for v1, v2 in zip(self.values, self.values[1:])):
            raise ValueError("❌ CalibrationMap: values décroissantes")
        if self.values[0] < 0.0 or self.values[-1] > 1.0:
            raise ValueError("❌ CalibrationMap: valeurs hors de [0, 1]")

    def appliquer(self, scores) -> np.ndarray:
        return np.interp(np.asarray(scores, dtype=np.float64), self.breakpoints, self.values)

    @classmethod
    def identite(cls) -> "CalibrationMap":
        return cls([0.0, 1.0], [0.0, 1.0])


@dataclass
class LigneMetriques:
    """Une ligne du tableau : AUC | On SI-SNR | Off OSR | MixIT* pour une condition."""
    condition: str
    calibre: bool
    auc: Optional[float]
    on_si_snr_db: List[float] = field(default_factory=list)
    osr_db: List[float] = field(default_factory=list)
    mixit_star_db: List[float] = field(default_factory=list)
    input_si_snr_db: List[float] = field(default_factory=list)
    nb_exemples: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.auc is not None and not 0.0 <= self.auc <= 1.0:
            raise ValueError(f"❌ LigneMetriques: auc hors de [0, 1] ({self.auc})")
        for nom in ("on_si_snr_db", "osr_db", "mixit_star_db", "input_si_snr_db"):
            if not all(np.isfinite(getattr(self, nom))):
                raise ValueError(f"❌ LigneMetriques: {nom} contient des valeurs non finies")

    @staticmethod
    def _mediane(valeurs: List[float]) -> Optional[float]:
        return float(np.median(valeurs)) if valeurs else None

    @staticmethod
    def _moyenne(valeurs: List[float]) -> Optional[float]:
        return float(np.mean(valeurs)) if valeurs else None

    def resume(self) -> Dict[str, Any]:
        return {
            "condition": self.condition,
            "calibre": self.calibre,
            "auc": self.auc,
            "on_si_snr_median_db": self._mediane(self.on_si_snr_db),
            "on_si_snr_mean_db": self._moyenne(self.on_si_snr_db),
            "osr_median_db": self._mediane(self.osr_db),
            "osr_mean_db": self._moyenne(self.osr_db),
            "mixit_star_median_db": self._mediane(self.mixit_star_db),
            "mixit_star_mean_db": self._moyenne(self.mixit_star_db),
            "input_si_snr_median_db": self._mediane(self.input_si_snr_db),
            "nb_exemples": dict(self.nb_exemples),
        }


@dataclass
class MetricsReport:
    """SORTIE DE : AgentEvaluation."""
    lignes: List[LigneMetriques]
    graine: int
    variante: str
    pretraine: bool = False

    def __post_init__(self):
        if not self.lignes:
            raise ValueError("❌ MetricsReport: aucune ligne de métriques")

    def ligne(self, condition: str, calibre: bool = False) -> LigneMetriques:
        for ligne in self.lignes:
            if ligne.condition == condition and ligne.calibre == calibre:
                return ligne
        raise KeyError(f"{condition} (calibre={calibre})")


@dataclass
class ResultatEntrainement:
    """SORTIE DE : AgentEntraineur."""
    mode: ModeEntrainement
    nb_pas: int
    chemin_checkpoint: str
    chemin_journal_pertes: str
    derniere_perte: float

    def __post_init__(self):
        if self.nb_pas < 0:
            raise ValueError(f"❌ ResultatEntrainement: nb_pas invalide ({self.nb_pas})")


# ========================================
# 5. MANIFESTES DE JEUX DE DONNÉES
# ========================================

@dataclass
class EntreeManifeste:
    """fonds : condition de fond ("offscreen" | "random") -> WAV de x₂ ; vide pour un mélange simple seul."""
    identifiant: str
    type_clip: str
    audio_x1: str
    fonds: Dict[str, str]
    nb_visibles: int
    nb_hors_champ: int
    cellules: List[List[int]] = field(default_factory=list)


@dataclass
class ManifesteJeu:
    split: str
    graine: int
    sample_rate: int
    fps: int
    grid_h: int
    grid_w: int
    fichier_tenseurs: str
    exemples: List[EntreeManifeste] = field(default_factory=list)
    version: int = 1

    @classmethod
    def depuis_dict(cls, data: Dict[str, Any]) -> "ManifesteJeu":
        data = dict(data)
        data["exemples"] = [EntreeManifeste(**e) for e in data.get("exemples", [])]
        return cls(**data)


# ========================================
# 6. RÈGLES D'ÉTIQUETAGE (calibration et AUC)
# ========================================

def etiquettes_sur_ecran(type_clip: TypeClip, est_mom: bool, M: int,
                         etiquettes_mixit: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Étiquette à l'écran de chaque source estimée :
        mélange simple, clip sur-écran seul   → toutes à 1
        clip hors-écran seul (simple ou MoM)  → toutes à 0
        MoM, premier clip sur-écran seul      → ligne x₁ de l'assignation MixIT
    """
    type_clip = TypeClip(type_clip)
    if type_clip == TypeClip.NON:
        raise ErreurDonnees("etiquettes_sur_ecran: un clip NOn n'a pas d'étiquette unanime")
    if type_clip == TypeClip.HORS_ECRAN:
        return np.zeros(M, dtype=np.int64)
    if not est_mom:
        return np.ones(M, dtype=np.int64)
    if etiquettes_mixit is None:
        raise ErreurDonnees("etiquettes_sur_ecran: MoM sur-écran sans assignation MixIT")
    etiquettes = np.asarray(etiquettes_mixit, dtype=np.int64)
    if etiquettes.shape != (M,):
        raise ErreurDonnees(f"etiquettes_sur_ecran: {etiquettes.shape} étiquettes pour M={M}")
    return etiquettes


# ========================================
#  --- STATS_MANAGER --- GESTION STANDARDISÉE DES STATISTIQUES
# ========================================

@dataclass
class StatsBase:
    nom_agent: str
    appels_total: int = 0
    erreurs_total: int = 0
    derniere_execution: Optional[str] = None
    timestamp_creation: str = field(default_factory=lambda: datetime.now().isoformat())
    stats_specifiques: Dict[str, Any] = field(default_factory=dict)

    def incrementer_appel(self) -> None:
        self.appels_total += 1
        self.derniere_execution = datetime.now().isoformat()

    def incrementer_erreur(self) -> None:
        self.erreurs_total += 1

    def incrementer_stat_specifique(self, nom: str, increment: float = 1) -> None:
        if nom in self.stats_specifiques:
            if isinstance(self.stats_specifiques[nom], (int, float)):
                self.stats_specifiques[nom] += increment
        else:
            self.stats_specifiques[nom] = increment

    def definir_stat_specifique(self, nom: str, valeur: Any) -> None:
        self.stats_specifiques[nom] = valeur

    def obtenir_stat_specifique(self, nom: str, defaut: Any = None) -> Any:
        return self.stats_specifiques.get(nom, defaut)

    def obtenir_statistiques(self) -> Dict[str, Any]:
        taux_reussite = 0.0
        if self.appels_total > 0:
            taux_reussite = ((self.appels_total - self.erreurs_total) / self.appels_total) * 100

        return {
            "agent": self.nom_agent,
            "appels_total": self.appels_total,
            "erreurs_total": self.erreurs_total,
            "taux_reussite": round(taux_reussite, 2),
            "derniere_activite": self.derniere_execution,
            "timestamp_creation": self.timestamp_creation,
            "stats_specifiques": self.stats_specifiques.copy(),
        }

    def obtenir_resume(self) -> str:
        stats = self.obtenir_statistiques()
        return (
            f"Agent: {stats['agent']} | "
            f"Appels: {stats['appels_total']} | "
            f"Erreurs: {stats['erreurs_total']} | "
            f"Taux réussite: {stats['taux_reussite']}%"
        )
