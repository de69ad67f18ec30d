#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AgentEvaluation - Métriques par condition (mélanges simples, MoMs par fond)
==========================================================================
Par exemple (en parallèle, fusion dans l'ordre du jeu) :
    - AUC : toutes les sources des clips sur-écran / hors-écran, poids = puissance estimée
    - On SI-SNR : x̂ᵒⁿ contre x₁ sur les clips sur-écran
    - Off OSR : réduction de puissance de x̂ᵒⁿ sur les clips hors-écran
    - MixIT* : MoMs sur-écran, indépendant de ŷ
    - SI-SNR d'entrée : x contre x₁ sur les MoMs sur-écran
Avec une carte de calibration, chaque condition produit une ligne brute et une ligne calibrée.
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from avscope.base.META_agent import AgentBase
from avscope.base.config_paths import nb_threads
from avscope.base.contrats_interface import (
    CalibrationMap,
    CustomJSONEncoder,
    ExempleAV,
    LigneMetriques,
    MetricsReport,
    TypeClip,
    etiquettes_sur_ecran,
)
from avscope.base.erreurs import ErreurDonnees, ErreurES
from avscope.sous_agents_gouvernes.agent_Evaluation.metriques import (
    mixit_star,
    osr,
    power_weighted_auc,
    si_snr,
    si_snr_detaille,
)

NOM_JSON = "rapport.json"
NOM_TABLEAU = "rapport.txt"


@dataclass
class MesureExemple:
    """Mesures d'un exemple, indexées par calibre (False = ŷ brut, True = ŷ calibré)."""
    type_clip: TypeClip
    est_mom: bool
    puissances: np.ndarray
    scores: Dict[bool, np.ndarray]
    etiquettes: Optional[np.ndarray] = None
    on_si_snr: Dict[bool, float] = field(default_factory=dict)
    osr: Dict[bool, float] = field(default_factory=dict)
    mixit_star: Optional[float] = None
    input_si_snr: Optional[float] = None
    estimations_nulles: Dict[bool, bool] = field(default_factory=dict)


def mesurer_exemple(modele, exemple: ExempleAV, carte: Optional[CalibrationMap] = None) -> MesureExemple:
    estimations, decision = modele.inferer(exemple)
    sources = estimations.sources
    scores = {False: decision.probabilities}
    if carte is not None:
        scores[True] = carte.appliquer(decision.probabilities)
    mesure = MesureExemple(exemple.type_clip, exemple.mom.est_mom, estimations.puissances, scores)
    if exemple.type_clip == TypeClip.NON:
        return mesure

    mixit = None
    if exemple.mom.est_mom and exemple.type_clip == TypeClip.SUR_ECRAN:
        assignation = modele.assignation_mixit(estimations, exemple.mom)
        mixit = assignation.matrice[0]
        x1 = exemple.mom.on_screen_mix.samples
        mesure.mixit_star = mixit_star(sources, x1, assignation)
        mesure.input_si_snr = si_snr(x1, exemple.mom.entree.samples)
    mesure.etiquettes = etiquettes_sur_ecran(exemple.type_clip, exemple.mom.est_mom, estimations.nb_sources, mixit)

    for calibre, y in scores.items():
        x_on = y @ sources
        if exemple.type_clip == TypeClip.SUR_ECRAN:
            valeur, nulle = si_snr_detaille(exemple.mom.on_screen_mix.samples, x_on)
            mesure.on_si_snr[calibre] = valeur
            mesure.estimations_nulles[calibre] = nulle
        else:
            mesure.osr[calibre] = osr(exemple.mom.entree.samples, x_on)
    return mesure


def agreger(condition: str, mesures: Sequence[MesureExemple], calibre: bool) -> LigneMetriques:
    etiquetees = [m for m in mesures if m.etiquettes is not None]
    auc = None
    if etiquetees:
        auc = power_weighted_auc(
            np.concatenate([m.scores[calibre] for m in etiquetees]),
            np.concatenate([m.etiquettes for m in etiquetees]),
            np.concatenate([m.puissances for m in etiquetees]),
        )
    return LigneMetriques(
        condition=condition,
        calibre=calibre,
        auc=auc,
        on_si_snr_db=[m.on_si_snr[calibre] for m in mesures if calibre in m.on_si_snr],
        osr_db=[m.osr[calibre] for m in mesures if calibre in m.osr],
        mixit_star_db=[m.mixit_star for m in mesures if m.mixit_star is not None],
        input_si_snr_db=[m.input_si_snr for m in mesures if m.input_si_snr is not None],
        nb_exemples={
            "total": len(mesures),
            "sur_ecran": sum(m.type_clip == TypeClip.SUR_ECRAN for m in mesures),
            "hors_ecran": sum(m.type_clip == TypeClip.HORS_ECRAN for m in mesures),
            "non": sum(m.type_clip == TypeClip.NON for m in mesures),
            "mom": sum(m.est_mom for m in mesures),
            "estimations_nulles": sum(m.estimations_nulles.get(calibre, False) for m in mesures),
        },
    )


# ========================================
# RAPPORT (JSON + tableau texte)
# ========================================

COLONNES = ("Condition", "Cal.", "AUC", "On SI-SNR", "Off OSR", "MixIT*", "In SI-SNR", "N")


def _cellule(valeur: Optional[float], format_: str = "{:.2f}") -> str:
    return "-" if valeur is None else format_.format(valeur)


def rapport_en_dict(rapport: MetricsReport) -> Dict:
    return {
        "graine": rapport.graine,
        "variante": rapport.variante,
        "pretraine": rapport.pretraine,
        "lignes": [ligne.resume() for ligne in rapport.lignes],
    }


def tableau_texte(rapport: MetricsReport) -> str:
    """Tableau aligné (médianes en dB)."""
    pt = " PT" if rapport.pretraine else ""
    lignes = [list(COLONNES)]
    for ligne in rapport.lignes:
        r = ligne.resume()
        lignes.append([
            ligne.condition,
            "oui" if ligne.calibre else "non",
            _cellule(r["auc"], "{:.3f}"),
            _cellule(r["on_si_snr_median_db"]),
            _cellule(r["osr_median_db"]),
            _cellule(r["mixit_star_median_db"]),
            _cellule(r["input_si_snr_median_db"]),
            str(r["nb_exemples"]["total"]),
        ])
    largeurs = [max(len(l[i]) for l in lignes) for i in range(len(COLONNES))]
    rendu = [" | ".join(c.ljust(w) for c, w in zip(l, largeurs)).rstrip() for l in lignes]
    rendu.insert(1, "-+-".join("-" * w for w in largeurs))
    entete = f"# {rapport.variante}{pt} (graine {rapport.graine})"
    return "\n".join([entete] + rendu) + "\n"


class AgentEvaluation(AgentBase):
    def __init__(self, nb_workers: Optional[int] = None):
        super().__init__(nom_agent="AgentEvaluation")
        self.nb_workers = nb_workers or nb_threads()
        self.logger.info(f"✅ AgentEvaluation prêt ({self.nb_workers} workers).")

    def mesurer(self, modele, exemples: Sequence[ExempleAV],
                carte: Optional[CalibrationMap] = None) -> List[MesureExemple]:
        travail = partial(mesurer_exemple, modele, carte=carte)
        if self.nb_workers == 1:
            return [travail(exemple) for exemple in exemples]
        with ThreadPoolExecutor(max_workers=self.nb_workers, thread_name_prefix="evaluation") as pool:
            return list(pool.map(travail, exemples))

    def evaluate_dataset(self, modele, jeux: Mapping[str, Sequence[ExempleAV]],
                         carte: Optional[CalibrationMap] = None, graine: int = 0,
                         variante: str = "", pretraine: bool = False) -> MetricsReport:
        if not jeux:
            raise ErreurDonnees("evaluate_dataset: aucune condition à évaluer")
        lignes: List[LigneMetriques] = []
        for condition, exemples in jeux.items():
            if not exemples:
                raise ErreurDonnees(f"evaluate_dataset: jeu vide pour la condition '{condition}'")
            mesures = self.mesurer(modele, exemples, carte)
            self.stats_manager.incrementer_stat_specifique("exemples_evalues", len(mesures))
            for calibre in ((False, True) if carte is not None else (False,)):
                ligne = agreger(condition, mesures, calibre)
                lignes.append(ligne)
                self.logger.log_metrique(f"evaluation/{condition}", {
                    k: v for k, v in ligne.resume().items() if k not in ("condition", "nb_exemples")
                })
            nulles = lignes[-1].nb_exemples["estimations_nulles"]
            if nulles:
                self.logger.log_warning(f"⚠️ {condition}: {nulles} estimations x̂ᵒⁿ nulles (SI-SNR bornée à -60 dB).")
            if lignes[-1].auc is None:
                self.logger.log_warning(f"⚠️ {condition}: AUC indéfinie (une seule classe étiquetée).")
        rapport = MetricsReport(lignes, graine, variante, pretraine)
        self.logger.log_thought(f"Rapport : {len(lignes)} lignes, {sum(len(e) for e in jeux.values())} exemples.")
        return self.valider_sortie(rapport)

    def ecrire_rapport(self, rapport: MetricsReport, dossier: Union[str, Path]) -> Tuple[Path, Path]:
        dossier = Path(dossier)
        chemin_json, chemin_txt = dossier / NOM_JSON, dossier / NOM_TABLEAU
        try:
            dossier.mkdir(parents=True, exist_ok=True)
            chemin_json.write_text(
                json.dumps(rapport_en_dict(rapport), cls=CustomJSONEncoder, indent=2, ensure_ascii=False),
                encoding="utf-8",
            )
            chemin_txt.write_text(tableau_texte(rapport), encoding="utf-8")
        except OSError as e:
            raise ErreurES(f"Écriture du rapport impossible dans {dossier}: {e}", chemin=str(dossier)) from e
        self.logger.info(f"💾 Rapport écrit : {chemin_json}, {chemin_txt}")
        return chemin_json, chemin_txt
