from .base import (AuthenticationError, BackendConfig, BackendError, BackendUnavailable,
                   ChatClient, ChatRequest, ChatResponse, EmptyOutputError, RefusalError,
                   ROLES, request_digest)
from .cache import ResponseCache
from .embedding import (Embedder, HashEmbedder, PixelProjectionEmbedder, normalize_rows,
                        semantic_distance)
from .http import HttpChatBackend, HttpEmbedder
from .mock import MockChatBackend, MockRule, load_rules

__all__ = [
    "AuthenticationError", "BackendConfig", "BackendError", "BackendUnavailable", "ChatClient",
    "ChatRequest", "ChatResponse", "EmptyOutputError", "RefusalError", "ROLES",
    "request_digest", "ResponseCache", "Embedder", "HashEmbedder", "PixelProjectionEmbedder",
    "normalize_rows", "semantic_distance", "HttpChatBackend", "HttpEmbedder",
    "MockChatBackend", "MockRule", "load_rules",
]
