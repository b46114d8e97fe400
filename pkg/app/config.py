import logging
import os
from pathlib import Path

from dotenv import load_dotenv

# Chargement des variables d'environnement
load_dotenv()


def _int_env(name: str, default: int) -> int:
    """Lit un entier depuis l'environnement, avec repli sur la valeur par défaut"""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring non-integer {name}={raw!r}")
        return default


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring non-numeric {name}={raw!r}")
        return default


# Parallélisme des cellules (stratégie x répétition) et du pool HTTP
PRISM_THREADS = max(1, _int_env("PRISM_THREADS", 1))

# Valeurs par défaut des options d'itération
PRISM_TOL_FRO = _float_env("PRISM_TOL_FRO", 1e-8)
PRISM_MAX_ITERS = max(1, _int_env("PRISM_MAX_ITERS", 100))
PRISM_SKETCH_ROWS = max(1, _int_env("PRISM_SKETCH_ROWS", 8))

# Dossier des rapports sauvegardés par l'API
PRISM_REPORT_DIR = Path(os.getenv("PRISM_REPORT_DIR", "reports"))

PRISM_LOG_LEVEL = os.getenv("PRISM_LOG_LEVEL", "INFO").upper()


def configure_logging(level: str = PRISM_LOG_LEVEL) -> None:
    """Configure le logging racine pour les points d'entrée (API et CLI)"""
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
