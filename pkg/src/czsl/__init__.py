"""Continual zero-shot learning over pre-extracted image features.

One conditional VAE is trained per task; frozen predecessors provide
generative replay so later modules do not forget earlier classes, and the
newest module synthesizes features for classes that have no training data
yet. A separate softmax classifier, trained purely on synthesized
features, produces the reported seen/unseen/harmonic accuracies.
"""

from czsl.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
