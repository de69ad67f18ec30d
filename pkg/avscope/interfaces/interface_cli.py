#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Interface en ligne de commande AVSCOPE.

    avscope synth-data      | train | calibrate | evaluate | bench-attention
            --config <yaml> --seed <n> --out <dossier>

Environnement (lu via python-dotenv, fichier .env accepté) :
    AVSCOPE_THREADS   plafond de parallélisme (torch + workers d'évaluation)
    AVSCOPE_JOURNAUX  forcé à <out>/journaux par la CLI

Code de sortie : 0 si succès, sinon le code de la catégorie d'erreur (diagnostic sur stderr),
1 pour une erreur inattendue.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import torch
from dotenv import load_dotenv

from avscope.base.config_paths import nb_threads
from avscope.base.contrats_interface import ConditionFond, EncoderVariant, ModeEntrainement
from avscope.base.erreurs import ErreurAVScope, ErreurES
from avscope.sous_agents_gouvernes.agent_Evaluation.agent_Evaluation import tableau_texte
from avscope.sous_agents_gouvernes.agent_Experience.agent_Experience import (
    DOSSIER_ENTRAINEMENT,
    AgentExperience,
)
from avscope.sous_agents_gouvernes.agent_Experience.banc_attention import grille_cellules
from avscope.sous_agents_gouvernes.agent_Experience.config_experience import ExperimentConfig

CONFIG_DEFAUT = (
    Path(__file__).resolve().parents[1] / "sous_agents_gouvernes" / "agent_Experience" / "config_experience.yaml"
)

logger = logging.getLogger("avscope.cli")


# ==============================================================================
# ARGUMENTS
# ==============================================================================

def construire_parser() -> argparse.ArgumentParser:
    commun = argparse.ArgumentParser(add_help=False)
    commun.add_argument("--config", type=Path, default=CONFIG_DEFAUT, help="Fichier YAML de configuration")
    commun.add_argument("--seed", type=int, default=None, help="Surcharge experience.seed")
    commun.add_argument("--out", type=Path, default=Path("avscope_sortie"), help="Dossier de sortie")

    donnees = argparse.ArgumentParser(add_help=False)
    donnees.add_argument("--data", type=Path, default=None, help="Dossier des jeux (défaut : <out>/donnees)")

    parser = argparse.ArgumentParser(prog="avscope", description="Séparation audio-visuelle à l'écran")
    sous = parser.add_subparsers(dest="commande", required=True)

    sous.add_parser("synth-data", parents=[commun, donnees], help="Génère les splits train/validation/test")

    train = sous.add_parser("train", parents=[commun, donnees], help="Pré-entraînement ou entraînement joint")
    train.add_argument("--mode", choices=[m.value for m in ModeEntrainement], default=ModeEntrainement.JOINT.value)
    train.add_argument("--pretrained", type=Path, default=None, help="Checkpoint de pré-entraînement (poids sep/)")
    train.add_argument("--resume", type=Path, default=None, help="Checkpoint à reprendre")

    calibrate = sous.add_parser("calibrate", parents=[commun, donnees], help="Calibration isotonique sur la validation")
    calibrate.add_argument("--checkpoint", type=Path, default=None)

    evaluate = sous.add_parser("evaluate", parents=[commun, donnees], help="Métriques sur le split de test")
    evaluate.add_argument("--checkpoint", type=Path, default=None)
    evaluate.add_argument("--calibration", type=Path, default=None)
    evaluate.add_argument("--conditions", nargs="+", choices=[c.value for c in ConditionFond],
                          default=[c.value for c in ConditionFond])

    bench = sous.add_parser("bench-attention", parents=[commun], help="Pics d'éléments α et durées par variante")
    for nom in ("M", "G", "T", "H", "D"):
        bench.add_argument(f"--{nom}", type=int, nargs="+", default=None, help=f"Valeurs de {nom} (défaut : config)")
    bench.add_argument("--variants", nargs="+", choices=[v.value for v in EncoderVariant],
                       default=[v.value for v in EncoderVariant])
    bench.add_argument("--csv", type=Path, default=None)
    return parser


def _checkpoint(args: argparse.Namespace) -> Path:
    return args.checkpoint or args.out / DOSSIER_ENTRAINEMENT / f"checkpoint_{ModeEntrainement.JOINT.value}.avsc"


# ==============================================================================
# COMMANDES
# ==============================================================================

def _synth_data(agent: AgentExperience, args: argparse.Namespace) -> None:
    for manifeste in agent.cli_synth_data(args.data):
        print(f"{manifeste.split}: {len(manifeste.exemples)} exemples")


def _train(agent: AgentExperience, args: argparse.Namespace) -> None:
    resultat = agent.cli_train(args.mode, args.data, args.pretrained, args.resume)
    print(f"{resultat.mode.value}: {resultat.nb_pas} pas, dernière perte {resultat.derniere_perte:.4f}")
    print(f"checkpoint : {resultat.chemin_checkpoint}")
    print(f"pertes     : {resultat.chemin_journal_pertes}")


def _calibrate(agent: AgentExperience, args: argparse.Namespace) -> None:
    carte = agent.cli_calibrate(_checkpoint(args), args.data)
    print(f"calibration : {len(carte.breakpoints)} points, valeurs [{carte.values[0]:.3f}, {carte.values[-1]:.3f}]")


def _evaluate(agent: AgentExperience, args: argparse.Namespace) -> None:
    rapport = agent.cli_evaluate(_checkpoint(args), args.calibration, args.data, args.conditions)
    print(tableau_texte(rapport), end="")


def _bench_attention(agent: AgentExperience, args: argparse.Namespace) -> None:
    cfg = agent.cfg
    cellules = grille_cellules(
        args.M or [cfg.modele.M], args.G or [cfg.G], args.T or [cfg.T], args.H or [cfg.modele.H], args.D or [cfg.modele.D],
    )
    mesures = agent.cli_bench_attention(cellules, args.variants, args.csv)
    for m in mesures:
        c = m.cellule
        mesure = "-" if m.mesure_etape is None else m.mesure_etape
        print(f"{m.variante.value:9s} M={c.M} G={c.G} T={c.T} H={c.H} D={c.D} "
              f"attendu={m.attendu_etape} mesuré={mesure} {m.statut}")


COMMANDES: Dict[str, Callable[[AgentExperience, argparse.Namespace], None]] = {
    "synth-data": _synth_data,
    "train": _train,
    "calibrate": _calibrate,
    "evaluate": _evaluate,
    "bench-attention": _bench_attention,
}


# ==============================================================================
# POINT D'ENTRÉE
# ==============================================================================

def _preparer_environnement(out: Path) -> None:
    journaux = out / "journaux"
    try:
        journaux.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ErreurES(f"Création impossible de {journaux}: {e}", chemin=str(journaux)) from e
    os.environ["AVSCOPE_JOURNAUX"] = str(journaux)
    torch.set_num_threads(nb_threads())


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    logging.basicConfig(level=logging.INFO, format="[%(asctime)s] {%(levelname)s} - %(message)s")
    args = construire_parser().parse_args(argv)
    try:
        _preparer_environnement(args.out)
        cfg = ExperimentConfig.charger(args.config)
        if args.seed is not None:
            cfg = cfg.avec_graine(args.seed)
        agent = AgentExperience(cfg, args.out)
        COMMANDES[args.commande](agent, args)
    except ErreurAVScope as e:
        print(e.diagnostic(), file=sys.stderr)
        return e.code
    except Exception as e:
        logger.exception(f"❌ Erreur inattendue pendant '{args.commande}'")
        print(f"[interne] {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
