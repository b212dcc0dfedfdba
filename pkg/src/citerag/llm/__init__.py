from .client import (ChatClient, GenerationConfig, HttpChatClient, LLMError, RateLimiter,
                     RecordingClient, ReplayClient, ReplayMiss, TranscriptStore, estimate_tokens,
                     generate, prompt_hash)
from .templates import (PromptTemplate, TemplateError, format_documents, load_template,
                        render_prompt)

__all__ = [
    "ChatClient", "GenerationConfig", "HttpChatClient", "LLMError", "PromptTemplate",
    "RateLimiter", "RecordingClient", "ReplayClient", "ReplayMiss", "TemplateError",
    "TranscriptStore", "estimate_tokens", "format_documents", "generate", "load_template",
    "prompt_hash", "render_prompt",
]
