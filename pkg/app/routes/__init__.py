# Routes package initialization
from .solver import router as solver_router
