#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AUDITOR BASE - Standards et contrats de sortie des agents
=========================================================
Chaque agent reçoit un AuditorBase (injecté par MetaAgent) qui connaît :
- ses chemins (journaux),
- les formats de sortie autorisés (noms de dataclasses du contrat),
- les stats spécifiques à suivre.
L'auditor NE CRÉE AUCUN DOSSIER : il vérifie seulement l'existence.
"""
import json
import logging
from dataclasses import dataclass, fields, is_dataclass
from datetime import datetime
from typing import Any, Dict, List, Optional, get_args, get_origin, get_type_hints

from avscope.base.config_paths import ROOT_DIR, dossier_journaux

_log = logging.getLogger("avscope.auditor")


@dataclass
class StandardsAgents:
    """
    Standards des agents AVSCOPE.
    "logs" vaut "@journaux" : résolu dynamiquement (AVSCOPE_JOURNAUX ou ROOT_DIR/journaux).
    """

    experience = {
        "paths": {"logs": "@journaux", "config": "avscope/sous_agents_gouvernes/agent_Experience/config_experience.yaml"},
        "formats_sortie": ["ManifesteJeu", "ResultatEntrainement", "CalibrationMap", "MetricsReport", "list"],
        "stats_specifiques": ["commandes_executees"],
    }

    separation = {
        "paths": {"logs": "@journaux"},
        "formats_sortie": ["SourceEstimates", "tuple"],
        "stats_specifiques": ["separations", "assignations_mixit"],
    }

    alignement = {
        "paths": {"logs": "@journaux"},
        "formats_sortie": ["OnScreenDecision"],
        "stats_specifiques": ["decisions"],
    }

    perception = {
        "paths": {"logs": "@journaux"},
        "formats_sortie": ["ExempleAV", "ManifesteJeu", "tuple"],
        "stats_specifiques": ["exemples_synthetises", "exemples_charges"],
    }

    entraineur = {
        "paths": {"logs": "@journaux"},
        "formats_sortie": ["ResultatEntrainement", "dict"],
        "stats_specifiques": ["pas_effectues"],
    }

    calibration = {
        "paths": {"logs": "@journaux"},
        "formats_sortie": ["CalibrationMap", "list"],
        "stats_specifiques": ["exemples_calibration"],
    }

    evaluation = {
        "paths": {"logs": "@journaux"},
        "formats_sortie": ["MetricsReport"],
        "stats_specifiques": ["exemples_evalues"],
    }


class AuditorBase:
    def __init__(self, nom_agent: str = "AuditorBase"):
        self.nom_agent = nom_agent.lower()
        self.standards = StandardsAgents()
        self._valeurs_par_defaut = {"paths": {}, "formats_sortie": ["dict"], "stats_specifiques": []}
        self.paths = self.get_config().get("paths", {})

    def get_config(self) -> Dict[str, Any]:
        return getattr(self.standards, self.nom_agent, self._valeurs_par_defaut)

    def get_path(self, path_type: str, nom_agent: Optional[str] = None) -> Optional[str]:
        nom_agent = nom_agent.lower() if nom_agent else self.nom_agent
        config_agent = getattr(self.standards, nom_agent, None)
        if not config_agent:
            _log.warning(f"AUDITOR: Agent '{nom_agent}' non trouvé dans StandardsAgents.")
            return None

        path_value = config_agent.get("paths", {}).get(path_type)
        if path_value == "@journaux":
            return str(dossier_journaux())
        if path_value:
            return str(ROOT_DIR / path_value)
        return None

    def get_formats_sortie(self) -> List[str]:
        return self.get_config().get("formats_sortie", ["dict"])

    def _persister_violation(self, type_violation: str, message: str, contexte: str):
        """Ajoute la violation au journal partagé violations_runtime.jsonl (si le dossier existe)."""
        cible = dossier_journaux() / "violations_runtime.jsonl"
        if not cible.parent.exists():
            return
        entry = {
            "timestamp": datetime.now().isoformat(),
            "agent_source": self.nom_agent,
            "type": type_violation,
            "message": message,
            "contexte": contexte,
        }
        try:
            with open(cible, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, ensure_ascii=False) + "\n")
        except OSError as e:
            _log.warning(f"⚠️ AUDITOR BASE: Impossible de persister la violation: {e}")

    def valider_format_sortie(self, data: Any) -> bool:
        """Validation stricte du format de sortie + vérification profonde des champs de liste."""
        formats = self.get_formats_sortie()
        valid = type(data).__name__ in formats

        if not valid:
            msg = f"L'objet {type(data).__name__} n'est pas autorisé. Attendus: {formats}"
            _log.warning(f"🚨 AUDITOR ALERTE SORTIE [{self.nom_agent}]: {msg}")
            self._persister_violation("FORMAT_SORTIE_INVALID", msg, "Sortie Agent")
            return False

        if is_dataclass(data):
            return self._valider_champs_profond(data)
        return True

    def _valider_champs_profond(self, dataclass_instance: Any) -> bool:
        """Vérifie que les listes typées (List[LigneMetriques]...) contiennent le bon type."""
        type_hints = get_type_hints(dataclass_instance.__class__)
        for f in fields(dataclass_instance):
            valeur = getattr(dataclass_instance, f.name)
            type_attendu = type_hints.get(f.name)
            if valeur is None or get_origin(type_attendu) not in (list, List):
                continue
            args = get_args(type_attendu)
            if not args or not is_dataclass(args[0]):
                continue
            for item in valeur:
                if not isinstance(item, args[0]):
                    msg = f"Champ '{f.name}' contient {type(item).__name__} au lieu de {args[0].__name__}"
                    _log.warning(f"🚨 ALERTE TYPE PROFONDE : {msg}")
                    self._persister_violation(
                        "VIOLATION_CONTRAT_PROFOND", msg, f"Dataclass {dataclass_instance.__class__.__name__}"
                    )
                    return False
        return True

    def enregistrer_stat(self, nom_methode: str, donnees: Dict[str, Any]) -> None:
        """Pont MetaAgent -> journal : durée et succès de chaque appel public."""
        _log.debug(f"[{self.nom_agent}] {nom_methode}: {donnees}")
