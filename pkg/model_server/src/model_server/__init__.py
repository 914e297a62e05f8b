"""Model server speaking the knowledge-probing scorer wire protocol.

Serves masked and causal language models over HTTP (`/v1/capabilities`,
`/v1/fill`, `/v1/perplexity`) and fine-tunes masked models on knowledge
triple folds (`/v1/finetune`).
"""

__version__ = "0.1.0"
