#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ExperimentConfig - Configuration typée d'une expérience AVSCOPE
================================================================
Chargée depuis la section "configuration" d'un YAML, découpée en sous-sections
(experience, donnees, modele, entrainement, evaluation). Un YAML sans clé "configuration"
est lu comme la section elle-même.
Chaque section refuse les clés inconnues : une faute de frappe est une erreur, jamais un défaut silencieux.

Valeurs dérivées : G = grid_h·grid_w, T = clip_seconds·fps, T' = clip_seconds·sample_rate.
"""
from pathlib import Path
from typing import List, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from avscope.base.contrats_interface import ConditionFond, EncoderVariant, ModeCorrelation
from avscope.base.erreurs import ErreurConfiguration, ErreurES


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class SectionExperience(_Section):
    seed: int = 0


class SectionDonnees(_Section):
    sample_rate: int = Field(8000, gt=0)
    clip_seconds: float = Field(1.0, gt=0)
    fps: int = Field(16, gt=0)
    grid_h: int = Field(8, gt=0)
    grid_w: int = Field(8, gt=0)
    patch: int = Field(4, gt=0)
    channels: int = Field(3, gt=0)
    n_train: int = Field(200, ge=0)
    n_validation: int = Field(64, ge=0)
    n_test: int = Field(64, ge=0)
    background: ConditionFond = ConditionFond.OFFSCREEN
    correlation: ModeCorrelation = ModeCorrelation.PERFECT
    max_onscreen_sources: int = Field(2, gt=0)
    max_offscreen_sources: int = Field(2, gt=0)
    wav_subtype: Literal["FLOAT", "PCM_16"] = "FLOAT"


class SectionModele(_Section):
    M: int = Field(4, gt=0, le=8)
    D: int = Field(64, gt=0)
    H: int = Field(4, gt=0)
    L: int = Field(4, gt=0)
    variant: EncoderVariant = EncoderVariant.SEP_SA
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    distinct_key_projection: bool = False
    time_encoding: bool = False
    pooling_query: Literal["sum", "mean"] = "sum"
    n_filters: int = Field(64, gt=0)
    kernel: int = Field(16, ge=2)
    dilations: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    n_mels: int = Field(32, gt=0)
    tau_db: float = 30.0


class SectionEntrainement(_Section):
    learning_rate: float = Field(1e-4, gt=0)
    batch_size: int = Field(8, gt=0)
    steps_pretrain: int = Field(2000, ge=0)
    steps_joint: int = Field(2000, ge=0)
    weight_mixit: float = Field(1.0, ge=0)
    weight_classifier: float = Field(1.0, ge=0)
    checkpoint_every: int = Field(200, gt=0)
    classifier_grad_to_separator: bool = False


class SectionEvaluation(_Section):
    power_weighted_calibration: bool = False
    bench_max_elements: float = Field(5e7, gt=0)


class ExperimentConfig(_Section):
    experience: SectionExperience = Field(default_factory=SectionExperience)
    donnees: SectionDonnees = Field(default_factory=SectionDonnees)
    modele: SectionModele = Field(default_factory=SectionModele)
    entrainement: SectionEntrainement = Field(default_factory=SectionEntrainement)
    evaluation: SectionEvaluation = Field(default_factory=SectionEvaluation)

    @model_validator(mode="after")
    def _coherence(self) -> "ExperimentConfig":
        if self.longueur % self.T:
            raise ValueError(f"T'={self.longueur} échantillons non divisibles en T={self.T} trames")
        if self.modele.D % self.modele.H:
            raise ValueError(f"D={self.modele.D} non divisible par H={self.modele.H}")
        if self.modele.kernel % 2:
            raise ValueError(f"noyau du séparateur impair ({self.modele.kernel})")
        if not self.modele.dilations or min(self.modele.dilations) < 1:
            raise ValueError(f"dilatations invalides {self.modele.dilations}")
        if self.donnees.max_onscreen_sources > self.G:
            raise ValueError(f"{self.donnees.max_onscreen_sources} sources visibles pour G={self.G}")
        return self

    # --- Valeurs dérivées ---
    @property
    def G(self) -> int:
        return self.donnees.grid_h * self.donnees.grid_w

    @property
    def T(self) -> int:
        return int(round(self.donnees.clip_seconds * self.donnees.fps))

    @property
    def longueur(self) -> int:
        return int(round(self.donnees.clip_seconds * self.donnees.sample_rate))

    @property
    def seed(self) -> int:
        return self.experience.seed

    # --- Persistance ---
    @classmethod
    def depuis_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return cls.model_validate(data or {})
        except ValidationError as e:
            raise ErreurConfiguration(f"Configuration invalide : {e}") from e

    @classmethod
    def charger(cls, chemin: Union[str, Path]) -> "ExperimentConfig":
        chemin = Path(chemin)
        try:
            with open(chemin, "r", encoding="utf-8") as f:
                brut = yaml.safe_load(f)
        except OSError as e:
            raise ErreurES(f"Configuration illisible {chemin}: {e}", chemin=str(chemin)) from e
        except yaml.YAMLError as e:
            raise ErreurConfiguration(f"YAML invalide {chemin}: {e}") from e
        if brut is not None and not isinstance(brut, dict):
            raise ErreurConfiguration(f"{chemin}: la racine du YAML doit être un dictionnaire de sections")
        if brut and "configuration" in brut:
            brut = brut["configuration"]
        return cls.depuis_dict(brut)

    def sauvegarder(self, chemin: Union[str, Path]) -> Path:
        chemin = Path(chemin)
        try:
            with open(chemin, "w", encoding="utf-8") as f:
                yaml.safe_dump({"configuration": self.model_dump(mode="json")}, f, sort_keys=False, allow_unicode=True)
        except OSError as e:
            raise ErreurES(f"Écriture impossible de {chemin}: {e}", chemin=str(chemin)) from e
        return chemin

    def avec_graine(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(update={"experience": SectionExperience(seed=seed)})
