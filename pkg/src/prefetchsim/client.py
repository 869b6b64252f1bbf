"""Synchronous client for the simulation service.

Without a server URL, requests run against the app in-process over an ASGI
transport: no socket, no separate process, same handlers. With a URL they go
over HTTP to an instance started with the serve command.
"""

import asyncio

import httpx


class ServiceError(RuntimeError):
    """Non-2xx response or unreachable server; message carries the detail."""


class ServiceClient:
    def __init__(self, server_url: str | None = None) -> None:
        self._server_url = server_url.rstrip("/") if server_url else None

    def get(self, path: str) -> dict:
        return self._request("GET", path, None)

    def post(self, path: str, payload: dict) -> dict:
        return self._request("POST", path, payload)

    def _request(self, method: str, path: str, payload: dict | None) -> dict:
        if self._server_url is None:
            return asyncio.run(self._asgi_request(method, path, payload))
        try:
            # no timeout: a full experiment matrix can legitimately run minutes
            with httpx.Client(base_url=self._server_url, timeout=None) as client:
                resp = client.request(method, path, json=payload)
        except httpx.HTTPError as exc:
            raise ServiceError(f"cannot reach {self._server_url}: {exc}") from None
        return self._decode(resp)

    async def _asgi_request(self, method: str, path: str, payload: dict | None) -> dict:
        from .service import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://prefetchsim", timeout=None
        ) as client:
            resp = await client.request(method, path, json=payload)
        return self._decode(resp)

    @staticmethod
    def _decode(resp: httpx.Response) -> dict:
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise ServiceError(f"{resp.status_code}: {detail}")
        return resp.json()
