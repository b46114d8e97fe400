"""Flux pseudo-aléatoires versionnés.

Tous les tirages de la bibliothèque (matrices de test, sketches) passent par
``generator(seed, stream)``. Le générateur est Philox4x64 de numpy (compteur),
clé = graine réduite à 64 bits, flux distincts obtenus par ``jumped(stream)``.
Changer cette construction impose d'incrémenter ``PRNG_VERSION``.
"""
import numpy as np

PRNG_VERSION = "philox4x64-jump-v1"

_MASK64 = (1 << 64) - 1


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Retourne un générateur déterministe pour (graine, flux)"""
    if stream < 0:
        raise ValueError(f"stream must be non-negative, got {stream}")
    bit_generator = np.random.Philox(key=int(seed) & _MASK64)
    if stream:
        bit_generator = bit_generator.jumped(stream)
    return np.random.Generator(bit_generator)
