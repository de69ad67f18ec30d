#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import json
import logging
import uuid
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional


class CognitiveLogger:
    """
    Journal double canal : console (logging standard) + fichier JSONL par session.
    Le chemin des journaux est fourni par l'auditor ; si le dossier n'existe pas,
    on reste en console seulement (aucun dossier n'est créé ici).
    """

    def __init__(self, nom_agent: Optional[str] = None, session_id: Optional[str] = None,
                 console_output: bool = True, auditor=None):
        self.session_id = session_id or uuid.uuid4().hex
        self.nom_agent = nom_agent or "Inconnu"
        self.auditor = auditor
        self.log_dir = self._dossier_journal()
        self.log_file: Optional[Path] = None
        if self.log_dir is not None and self.log_dir.is_dir():
            self.log_file = self.log_dir / f"session_{self.session_id}.jsonl"
        self.std_logger = self._logger_console(console_output)

    def _dossier_journal(self) -> Optional[Path]:
        if self.auditor is None:
            return None
        try:
            chemin = self.auditor.get_path("logs")
        except Exception as e:
            logging.getLogger("avscope").warning(f"⚠️ [{self.nom_agent}] Dossier des journaux introuvable : {e}")
            return None
        return Path(chemin) if chemin else None

    def _logger_console(self, console_output: bool) -> logging.Logger:
        # Un logger par agent, sans propagation : la CLI a son propre handler racine
        journal = logging.getLogger(f"avscope.{self.nom_agent}")
        journal.setLevel(logging.DEBUG)
        journal.propagate = False
        if console_output and not journal.handlers:
            sortie = logging.StreamHandler()
            sortie.setLevel(logging.INFO)
            sortie.setFormatter(logging.Formatter("[%(name)s] %(levelname)s: %(message)s"))
            journal.addHandler(sortie)
        return journal

    def _emettre(self, niveau: str, message: str, evenement: Dict[str, Any], exc_info=False):
        self.std_logger.log(getattr(logging, niveau), message, exc_info=exc_info)

        if self.log_file is None:
            return
        try:
            with open(self.log_file, "a", encoding="utf-8") as f:
                f.write(json.dumps(evenement, ensure_ascii=False, default=str) + "\n")
        except OSError as e:
            self.std_logger.warning(f"[LOGGER ERROR] Impossible d'écrire dans {self.log_file}: {e}")

    def _entree(self, type_evenement: str, **champs) -> Dict[str, Any]:
        return {"timestamp": self._now(), "type": type_evenement, "agent": self.nom_agent, **champs}

    def log_thought(self, thought_text: str):
        self._emettre(
            "DEBUG", f"🧠 THOUGHT: {thought_text}", self._entree("thought", content=thought_text)
        )

    def log_metrique(self, nom: str, valeurs: Dict[str, Any], pas: Optional[int] = None):
        """Métriques numériques (pertes, AUC...) : une ligne JSONL exploitable par les tests."""
        resume = " | ".join(
            f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in valeurs.items()
        )
        prefixe = f"[pas {pas}] " if pas is not None else ""
        self._emettre(
            "INFO",
            f"📈 {prefixe}{nom}: {resume}",
            self._entree("metrique", nom=nom, pas=pas, valeurs=valeurs),
        )

    def log_error(self, error_msg: str, exc_info=False):
        self._emettre(
            "ERROR", f"ERROR: {error_msg}", self._entree("error", message=error_msg), exc_info=exc_info
        )

    def log_warning(self, warning_msg: str):
        self._emettre("WARNING", f"WARNING: {warning_msg}", self._entree("warning", message=warning_msg))

    def info(self, message: str):
        """Compatibilité avec logging standard"""
        self._emettre("INFO", message, self._entree("info", message=message))

    def _now(self):
        return datetime.now().isoformat()
