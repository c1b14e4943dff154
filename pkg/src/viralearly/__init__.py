"""Early virality prediction for meme posts.

End-to-end pipeline: dataset ingestion and quality filtering, engagement
tracking on a dynamic poll schedule, data-driven virality labeling, windowed
multimodal feature extraction, leak-free preprocessing and evaluation of
three classifier families, plus the window-sweep / ablation / importance
studies and a synthetic-corpus generator for desk-scale verification.
"""

__version__ = "0.1.0"
