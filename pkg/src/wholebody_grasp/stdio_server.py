"""
STDIO MCP Server for the grasp simulator

Run this for local use with MCP Inspector or a desktop agent. The agent owns
stdout for the protocol, so everything the simulator logs goes to stderr.
Experiments requested over this transport write under ``WHOLEBODY_GRASP_OUT``
unless the tool call names another directory.
"""

import asyncio
import logging

from mcp.server.stdio import stdio_server

from .mcp_server import create_mcp_server, load_serving_settings

logger = logging.getLogger(__name__)


async def main():
    """Run the MCP server with stdio transport."""
    settings = load_serving_settings()
    server = create_mcp_server(settings)
    logger.info(f"grasp simulator on stdio, results under {settings.out_dir} ({settings.jobs} worker(s))")

    async with stdio_server() as (read_stream, write_stream):
        await server.run(
            read_stream,
            write_stream,
            server.create_initialization_options(),
        )
    logger.info("stdio session closed")


if __name__ == "__main__":
    asyncio.run(main())
