"""Multiuser image encryption through simulated dynamic scattering media.

The pipeline: sample nanoparticle aggregates (``foldylax``), compute their
scattering matrices, combine a subset of states with a user-pair key
(``keyring``), synthesize the incident field by truncated-SVD inversion
(``inversion``) and record it as an off-axis hologram (``holography``).
``protocol`` wraps this in a server with receipts and credentials and
``attacks`` scores misuse with SSIM (``metrics``).
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import ScatterCryptError
from .experiment import Experiment, RunSettings, load_config
from .protocol import FIELD, HOLOGRAM, EncryptionServer, PlaintextImage, Receipt
from .scene import Scene, build_scene

__all__ = [
    "BACKEND", "ScatterCryptError", "Experiment", "RunSettings", "load_config",
    "FIELD", "HOLOGRAM", "EncryptionServer", "PlaintextImage", "Receipt", "Scene", "build_scene",
    "__version__",
]
