import logging
import os

from dotenv import load_dotenv
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect, status
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app import __version__
from app.config import configure_logging
from app.routes.solver import router as solver_router
from app.websocket.manager import manager

# Chargement des variables d'environnement
load_dotenv()
configure_logging()

logger = logging.getLogger(__name__)

app = FastAPI(
    title="PRISM API",
    description="Fonctions matricielles denses par itérations polynomiales à coefficients adaptatifs",
    version=__version__,
    redirect_slashes=True
)

# Configuration CORS
origins = [
    os.getenv("FRONTEND_URL", "http://localhost:3000"),
    os.getenv("FRONTEND_URL_ALTERNATIVE", "http://127.0.0.1:3000"),
]

app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["Content-Type", "Accept", "Origin", "X-Requested-With"],
    max_age=3600,
)


# Un corps de requête invalide est une erreur de configuration : 400
@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    logger.warning(f"Invalid request on {request.url.path}: {exc.errors()}")
    return JSONResponse(
        status_code=status.HTTP_400_BAD_REQUEST,
        content={"detail": jsonable_errors(exc)},
    )


def jsonable_errors(exc: RequestValidationError):
    return [{"loc": list(err.get("loc", ())), "msg": err.get("msg", "")} for err in exc.errors()]


@app.websocket("/ws/progress")
async def progress_endpoint(websocket: WebSocket):
    await manager.connect(websocket)
    try:
        while True:
            # Garde la connexion ouverte (ping/pong)
            await websocket.receive_text()
            await websocket.send_text('pong')
    except WebSocketDisconnect:
        pass
    except Exception as e:
        logger.warning(f"WebSocket error: {e}")
    finally:
        manager.disconnect(websocket)


# Inclusion des routes
app.include_router(solver_router, prefix="/api", tags=["solver"])


# Health check endpoint
@app.get("/health")
async def health_check():
    return {"status": "healthy", "version": __version__}


# Point d'entrée pour lancer l'application
if __name__ == "__main__":
    import uvicorn
    uvicorn.run("main:app", host="0.0.0.0", port=8000, reload=True)
