#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
META AGENT - Outils communs des agents AVSCOPE
Avant __init__, chaque agent reçoit :
    - stats_manager : StatsBase (appels, erreurs, durées cumulées par méthode)
    - auditor       : AuditorBase (chemins, formats de sortie autorisés)
    - logger        : CognitiveLogger (console + journal JSONL)
Toutes les méthodes publiques déclarées par la classe de l'agent sont instrumentées.
"""
import functools
import time

from avscope.base.auditor_base import AuditorBase
from avscope.base.cognitive_logger import CognitiveLogger
from avscope.base.contrats_interface import StatsBase


def _instrumenter(agent, nom: str, methode):
    stats = agent.stats_manager

    @functools.wraps(methode)
    def appel_instrumente(*args, **kwargs):
        stats.incrementer_appel()
        stats.incrementer_stat_specifique(f"appels_{nom}")
        debut = time.perf_counter()
        succes = False
        try:
            resultat = methode(agent, *args, **kwargs)
            succes = True
            return resultat
        except Exception:
            stats.incrementer_erreur()
            stats.incrementer_stat_specifique(f"erreurs_{nom}")
            raise
        finally:
            duree_ms = (time.perf_counter() - debut) * 1000
            stats.incrementer_stat_specifique(f"duree_ms_{nom}", duree_ms)
            agent.auditor.enregistrer_stat(nom, {"succes": succes, "duree_ms": duree_ms})

    return appel_instrumente


def _est_instrumentable(nom: str, valeur) -> bool:
    if nom.startswith("_") or not callable(valeur):
        return False
    return not isinstance(valeur, (staticmethod, classmethod, type))


class MetaAgent(type):
    def __call__(cls, *args, **kwargs):
        agent = cls.__new__(cls)
        nom_court = cls.__name__.replace("Agent", "")

        agent.stats_manager = StatsBase(nom_court)
        agent.auditor = AuditorBase(nom_court.lower())
        agent.logger = CognitiveLogger(nom_agent=nom_court, auditor=agent.auditor, console_output=True)

        for nom, valeur in vars(cls).items():
            if _est_instrumentable(nom, valeur):
                setattr(agent, nom, _instrumenter(agent, nom, valeur))

        cls.__init__(agent, *args, **kwargs)
        agent.logger.log_thought(f"✅ {cls.__name__} initialisé et instrumenté.")
        return agent


class AgentBase(metaclass=MetaAgent):
    """Classe de base des agents : hériter suffit pour passer par MetaAgent."""
    auditor: "AuditorBase"
    stats_manager: "StatsBase"
    logger: "CognitiveLogger"

    def __init__(self, nom_agent: str = None):
        self.nom = nom_agent or self.__class__.__name__.replace("Agent", "")

    def valider_sortie(self, resultat):
        """Contrôle la sortie avec l'auditor ; une violation est journalisée, jamais bloquante."""
        if not self.auditor.valider_format_sortie(resultat):
            self.logger.log_warning(f"❌ Sortie hors contrat : {type(resultat).__name__}")
        return resultat


__all__ = ["MetaAgent", "AgentBase"]
