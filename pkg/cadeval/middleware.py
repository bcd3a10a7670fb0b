import logging
import time

from fastapi import HTTPException, Request
from starlette.middleware.base import BaseHTTPMiddleware

logger = logging.getLogger(__name__)


class RequestLoggingMiddleware(BaseHTTPMiddleware):
    """
    A middleware that logs every request with its status and duration,
    and logs then re-raises unhandled exceptions.
    """

    async def dispatch(self, request: Request, call_next):
        start_time = time.time()
        logger.info(
            "Processing request %s %s %s",
            self.get_client_ip(request),
            request.method,
            request.url.path,
        )
        logger.debug("Request headers: %s", self.obtain_necessary_headers(request))

        try:
            response = await call_next(request)

            if response.status_code >= 500:
                logger.critical(
                    "Server error response status_code: %s", response.status_code
                )
            elif response.status_code >= 400:
                logger.warning("Error response %s", response.status_code)
            else:
                logger.info("Request completed %s", response.status_code)
            return response
        except HTTPException as exc:
            logger.error("HTTP Exception occurred %s", exc.detail)
            raise exc
        except Exception as exc:
            logger.critical("Unhandled exception occurred %s", str(exc))
            raise exc
        finally:
            logger.info(
                "Request processed in %.2f seconds", time.time() - start_time
            )

    def obtain_necessary_headers(self, request: Request) -> dict:
        """
        Extract the headers worth logging from the request.
        """
        return {
            "User-Agent": request.headers.get("User-Agent", ""),
            "Content-Type": request.headers.get("Content-Type", ""),
            "Content-Length": request.headers.get("Content-Length", ""),
        }

    def get_client_ip(self, request: Request) -> str:
        """
        Extract client IP address from the request headers.
        """
        forwarded_for = request.headers.get("X-Forwarded-For")
        if forwarded_for:
            return forwarded_for.split(",")[0]
        return request.client.host if request.client else "unknown"
