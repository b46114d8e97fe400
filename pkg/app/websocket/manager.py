import asyncio
import logging
from typing import List

from fastapi import WebSocket

logger = logging.getLogger(__name__)


class ProgressManager:
    """Diffuse la progression des résolutions en cours aux clients websocket"""

    def __init__(self):
        self.active_connections: List[WebSocket] = []

    async def connect(self, websocket: WebSocket):
        await websocket.accept()
        self.active_connections.append(websocket)
        logger.debug(f"Progress client connected ({len(self.active_connections)} active)")

    def disconnect(self, websocket: WebSocket):
        if websocket in self.active_connections:
            self.active_connections.remove(websocket)

    async def broadcast(self, message: dict):
        if not self.active_connections:
            return

        disconnected = []
        for connection in list(self.active_connections):
            try:
                await connection.send_json(message)
            except Exception:
                disconnected.append(connection)

        for connection in disconnected:
            self.disconnect(connection)

    def broadcast_threadsafe(self, loop: asyncio.AbstractEventLoop, message: dict) -> None:
        """Planifie une diffusion depuis un thread de calcul (sans attendre l'envoi)"""
        if not self.active_connections or loop.is_closed():
            return
        asyncio.run_coroutine_threadsafe(self.broadcast(message), loop)


manager = ProgressManager()
