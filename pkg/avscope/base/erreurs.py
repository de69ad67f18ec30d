#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Hiérarchie d'erreurs AVSCOPE.
Chaque erreur porte une catégorie de diagnostic et le code de sortie de la CLI.
"""


class ErreurAVScope(Exception):
    categorie = "interne"
    code = 1

    def __init__(self, message: str, **contexte):
        super().__init__(message)
        self.message = message
        self.contexte = contexte

    def __str__(self):
        return self.message

    def diagnostic(self) -> str:
        return f"[{self.categorie}] {self.message}"


class ErreurConfiguration(ErreurAVScope, ValueError):
    """Clé inconnue, valeur invalide, manifeste incompatible avec la config."""
    categorie = "configuration"
    code = 2


class ErreurES(ErreurAVScope, OSError):
    categorie = "entree_sortie"
    code = 3


class ErreurNumerique(ErreurAVScope, ArithmeticError):
    """Perte NaN/Inf pendant l'entraînement."""
    categorie = "numerique"
    code = 4


class ErreurDonnees(ErreurAVScope, ValueError):
    categorie = "donnees"
    code = 5


class ErreurForme(ErreurDonnees):
    """Violation d'un contrat de forme. L'axe fautif est toujours nommé."""

    def __init__(self, message: str, axe: str = None, **contexte):
        super().__init__(message, axe=axe, **contexte)
        self.axe = axe


class ErreurParametre(ErreurAVScope, KeyError):
    categorie = "donnees"
    code = 5

    def __init__(self, message: str, nom: str = None):
        super().__init__(message, nom=nom)
        self.nom = nom


__all__ = [
    "ErreurAVScope",
    "ErreurConfiguration",
    "ErreurES",
    "ErreurNumerique",
    "ErreurDonnees",
    "ErreurForme",
    "ErreurParametre",
]
