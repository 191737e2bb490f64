from .conflicts import DEFAULT_REQUIRED_ROLES, ConflictFinding, ConflictReport, detect_conflicts
from .consent_contract import CONSENT_CONTRACT, PPA_CONTRACT, ConsentContract, PpaIntegrityContract
from .container import ArchiveEntry, ConsentContainer, ContainerView
from .service import ConsentService, Integrity, PpaRegistry, SealMode

__all__ = [
    "DEFAULT_REQUIRED_ROLES", "ConflictFinding", "ConflictReport", "detect_conflicts",
    "CONSENT_CONTRACT", "PPA_CONTRACT", "ConsentContract", "PpaIntegrityContract",
    "ArchiveEntry", "ConsentContainer", "ContainerView",
    "ConsentService", "Integrity", "PpaRegistry", "SealMode",
]
