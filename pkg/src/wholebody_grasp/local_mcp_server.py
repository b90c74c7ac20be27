"""
Local HTTP MCP Server for the grasp simulator

Serves the simulator tools over the Streamable HTTP transport at ``/mcp``.
Two plain GET routes sit next to it:

- ``/health`` reports the version, the results root and the builtin experiments.
- ``/experiments/{name}/manifest`` returns ``<results root>/<name>/manifest.json``.
  The runner rewrites that file after every finished run, so a client can
  follow a long sweep (``complete`` stays false until the last run).
"""

import contextlib
import json
import logging
from pathlib import Path

import uvicorn
from mcp.server.streamable_http_manager import StreamableHTTPSessionManager
from starlette.applications import Starlette
from starlette.middleware.cors import CORSMiddleware
from starlette.requests import Request
from starlette.responses import JSONResponse
from starlette.routing import Mount, Route
from starlette.types import Receive, Scope, Send

from . import __version__
from .config import RuntimeSettings
from .experiments import builtin_experiments
from .mcp_server import create_mcp_server, load_serving_settings

logger = logging.getLogger(__name__)


def create_app(settings: RuntimeSettings | None = None) -> Starlette:
    """Create the Starlette app with the MCP server and the result routes mounted."""
    settings = settings or RuntimeSettings.from_env()
    results_root = Path(settings.out_dir)
    mcp_server = create_mcp_server(settings)

    # stateless: every tool call is self-contained, results live on disk
    session_manager = StreamableHTTPSessionManager(
        app=mcp_server,
        json_response=True,
        stateless=True,
    )

    async def health(request: Request) -> JSONResponse:
        return JSONResponse({
            "status": "healthy",
            "service": "wholebody-grasp-mcp",
            "version": __version__,
            "transport": "streamable-http",
            "results_dir": str(results_root),
            "experiments": sorted(builtin_experiments()),
        })

    async def manifest(request: Request) -> JSONResponse:
        name = request.path_params["name"]
        # one directory level below the results root, nothing else
        if Path(name).name != name or name.startswith("."):
            return JSONResponse({"error": f"invalid experiment name {name!r}"}, status_code=400)
        path = results_root / name / "manifest.json"
        if not path.is_file():
            return JSONResponse({"error": f"no manifest for {name}"}, status_code=404)
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            logger.warning(f"unreadable manifest {path}: {e}")
            return JSONResponse({"error": f"manifest for {name} is unreadable"}, status_code=500)
        return JSONResponse(payload)

    async def handle_streamable_http(scope: Scope, receive: Receive, send: Send) -> None:
        await session_manager.handle_request(scope, receive, send)

    @contextlib.asynccontextmanager
    async def lifespan(app: Starlette):
        logger.info(f"grasp simulator MCP server up, results under {results_root}")
        async with session_manager.run():
            try:
                yield
            finally:
                logger.info("grasp simulator MCP server stopped")

    starlette_app = Starlette(
        routes=[
            Route("/health", health, methods=["GET"]),
            Route("/experiments/{name}/manifest", manifest, methods=["GET"]),
            Mount("/mcp", app=handle_streamable_http),
        ],
        lifespan=lifespan,
    )

    # Browser-based clients need the session header exposed
    return CORSMiddleware(
        starlette_app,
        allow_origins=["*"],
        allow_methods=["GET", "POST", "DELETE"],
        expose_headers=["Mcp-Session-Id"],
    )


def main():
    """Run the local MCP server; invalid settings stop it before it binds."""
    settings = load_serving_settings()
    host, port = settings.mcp_host, settings.mcp_port
    logger.info(f"MCP endpoint: http://{host}:{port}/mcp")
    logger.info(f"Run manifests: http://{host}:{port}/experiments/<name>/manifest")
    uvicorn.run(create_app(settings), host=host, port=port)


if __name__ == "__main__":
    main()
