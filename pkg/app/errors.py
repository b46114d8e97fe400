"""Hiérarchie d'exceptions de la bibliothèque.

Toutes les erreurs levées volontairement dérivent de ``PrismError`` ; la CLI et
l'API les traduisent en codes de sortie / statuts HTTP.
"""
from typing import Optional


class PrismError(Exception):
    """Erreur de base"""


class ShapeError(PrismError):
    """Dimensions incompatibles"""


class SymmetryError(PrismError):
    """Matrice (ou carré de matrice) non symétrique"""


class DefinitenessError(PrismError):
    """Matrice non définie positive"""

    def __init__(self, message: str, pivot_index: Optional[int] = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class SingularityError(PrismError):
    """Valeur propre / singulière sous le seuil pour une fonction de type inverse"""


class ConfigurationError(PrismError):
    """Paramètres invalides (famille, degré, stratégie, spécification d'entrée)"""


class MissingPowerError(PrismError):
    """Table de traces trop courte pour les coefficients demandés"""

    def __init__(self, message: str, needed: int = 0, available: int = 0):
        super().__init__(message)
        self.needed = needed
        self.available = available


class DegenerateInputError(PrismError):
    """Entrée impossible à normaliser (matrice nulle)"""


class NumericalInstabilityError(PrismError):
    """Échec numérique en cours d'itération"""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


class MatrixFormatError(PrismError):
    """Fichier matrice invalide (MTXB ou texte)"""


# Erreurs d'usage (entrée mal formée ou non symétrique) : code de sortie 2 côté CLI, 400 côté API
USAGE_ERRORS = (ConfigurationError, MatrixFormatError, ShapeError, SymmetryError)
