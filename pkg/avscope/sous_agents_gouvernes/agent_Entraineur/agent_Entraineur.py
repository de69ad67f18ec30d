#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
AgentEntraineur - Boucle d'entraînement MixIT / joint
=====================================================
Pipeline "Offline Training" :
1.  **Tirage** : un lot de MoMs par pas, indices tirés de (graine, pas).
2.  **Pas** : train_step (pas_entrainement.py) ; perte MixIT seule en pré-entraînement,
    MixIT + entropie croisée sur les pseudo-étiquettes en mode joint.
3.  **Journal** : une ligne CSV par pas (pas, mixit, classifieur, totale).
4.  **Checkpoints** : tous les `checkpoint_every` pas puis en fin de boucle, poids + état Adam.

Une perte NaN/Inf interrompt la boucle avant la mise à jour ; le dernier checkpoint
écrit reste intact et permet la reprise (`reprise=`).
"""
import csv
from pathlib import Path
from typing import Optional, Sequence, Union

from avscope.base.META_agent import AgentBase
from avscope.base.contrats_interface import ExempleAV, ModeEntrainement, ResultatEntrainement
from avscope.base.erreurs import ErreurDonnees, ErreurES, ErreurNumerique
from avscope.moteurs.conteneur_avsc import ecrire_checkpoint, lire_checkpoint
from avscope.sous_agents_gouvernes.agent_Entraineur.pas_entrainement import (
    ReglagesEntrainement,
    charger_etat_optimiseur,
    creer_optimiseur,
    empiler_lot,
    etat_optimiseur,
    generateur_pas,
    parametres_entraines,
    tirer_indices,
    train_step,
)

ENTETE_JOURNAL = ["pas", "mixit", "classifieur", "totale"]


class AgentEntraineur(AgentBase):
    def __init__(self, reglages: ReglagesEntrainement):
        super().__init__(nom_agent="AgentEntraineur")
        self.reglages = reglages
        self.logger.info(
            f"✅ AgentEntraineur prêt (lr={reglages.learning_rate}, lot={reglages.batch_size}, "
            f"checkpoint tous les {reglages.checkpoint_every} pas)."
        )

    def entrainer(self, modele, exemples: Sequence[ExempleAV], mode: ModeEntrainement, nb_pas: int,
                  dossier_sortie: Union[str, Path], reprise: Optional[Union[str, Path]] = None) -> ResultatEntrainement:
        mode = ModeEntrainement(mode)
        if not exemples:
            raise ErreurDonnees("entrainer: aucun exemple d'entraînement")
        dossier = Path(dossier_sortie)
        try:
            dossier.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ErreurES(f"Création impossible de {dossier}: {e}", chemin=str(dossier)) from e

        chemin_checkpoint = dossier / f"checkpoint_{mode.value}.avsc"
        chemin_journal = dossier / f"pertes_{mode.value}.csv"
        noms = parametres_entraines(modele.params, mode)
        optimiseur = creer_optimiseur(modele.params, noms, self.reglages.learning_rate)

        debut = 0
        if reprise is not None:
            poids, etat, debut = lire_checkpoint(reprise)
            modele.params.charger_valeurs(poids, strict=True)
            charges = charger_etat_optimiseur(optimiseur, noms, etat)
            self.logger.info(f"🔁 Reprise depuis {reprise} au pas {debut} ({charges} états Adam restaurés).")

        self.logger.info(
            f"🚀 Entraînement {mode.value} : pas {debut} → {nb_pas}, {len(noms)} tenseurs optimisés, "
            f"{len(exemples)} exemples."
        )
        derniere = float("nan")
        reglages = self.reglages
        nouveau_journal = reprise is None or not chemin_journal.exists()
        try:
            with open(chemin_journal, "w" if nouveau_journal else "a", encoding="utf-8", newline="") as f:
                journal = csv.writer(f)
                if nouveau_journal:
                    journal.writerow(ENTETE_JOURNAL)
                for pas in range(debut, nb_pas):
                    indices = tirer_indices(reglages.graine, pas, len(exemples), reglages.batch_size)
                    lot = empiler_lot([exemples[i] for i in indices])
                    try:
                        pertes = train_step(modele, lot, optimiseur, noms, mode, reglages, pas,
                                            generateur_pas(reglages.graine, pas))
                    except ErreurNumerique as e:
                        self.logger.log_error(f"❌ {e} ; dernier checkpoint conservé : {chemin_checkpoint}")
                        raise

                    valeurs = pertes.valeurs()
                    journal.writerow([pas, valeurs["mixit"], "" if pertes.classifieur is None else valeurs["classifieur"],
                                      valeurs["totale"]])
                    derniere = valeurs["totale"]
                    self.stats_manager.incrementer_stat_specifique("pas_effectues")

                    if (pas + 1) % reglages.checkpoint_every == 0:
                        f.flush()
                        ecrire_checkpoint(chemin_checkpoint, modele.params.valeurs(),
                                          etat_optimiseur(optimiseur, noms), pas + 1)
                        self.logger.log_metrique(f"entrainement_{mode.value}", valeurs, pas=pas + 1)
        except ErreurES:
            raise
        except OSError as e:
            raise ErreurES(f"Journal de pertes inaccessible {chemin_journal}: {e}", chemin=str(chemin_journal)) from e

        ecrire_checkpoint(chemin_checkpoint, modele.params.valeurs(), etat_optimiseur(optimiseur, noms), max(nb_pas, debut))
        self.logger.info(f"💾 Checkpoint final : {chemin_checkpoint} (dernière perte {derniere:.4f})")
        return self.valider_sortie(ResultatEntrainement(
            mode=mode,
            nb_pas=max(nb_pas - debut, 0),
            chemin_checkpoint=str(chemin_checkpoint),
            chemin_journal_pertes=str(chemin_journal),
            derniere_perte=derniere,
        ))
