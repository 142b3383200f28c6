"""
Repository for training checkpoints.

A checkpoint is one JSON document bundling the SAC agent (actor, critics,
targets, log alpha, optimizer moments) and the outer slider policy. Tensors
are nested lists with shape metadata; binary64 values round-trip exactly.
"""

import json
from pathlib import Path
from typing import Any, Optional

from app.core.exceptions import CheckpointError, CheckpointVersionMismatchError
from app.core.logging import get_logger
from app.services.sac import SacAgent
from app.services.spg import OuterPolicy

logger = get_logger(__name__)

CHECKPOINT_VERSION = 1


class CheckpointRepository:
    """Reads and writes checkpoints under a run directory."""

    def __init__(self, root: Path):
        """
        Initialize repository.

        Args:
            root: Directory holding checkpoint files
        """
        self.root = Path(root)

    def path_for(self, name: str) -> Path:
        return self.root / f"{name}.json"

    def save(
        self,
        name: str,
        agent: SacAgent,
        outer: Optional[OuterPolicy] = None,
        meta: Optional[dict[str, Any]] = None,
    ) -> Path:
        """
        Write a checkpoint.

        Args:
            name: File stem, e.g. "episode_001000" or "final"
            agent: Inner SAC agent
            outer: Outer slider policy (omitted for inner-only checkpoints)
            meta: Extra metadata such as the episode index

        Returns:
            Path of the written file
        """
        document = {
            "version": CHECKPOINT_VERSION,
            "meta": meta or {},
            "agent": agent.state_dict(),
            "outer": outer.state_dict() if outer is not None else None,
        }
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(name)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(document), encoding="utf-8")
        tmp.replace(path)
        logger.info(f"Checkpoint saved: {path}")
        return path

    @staticmethod
    def load(path: Path, seed: int = 0) -> tuple[SacAgent, Optional[OuterPolicy], dict[str, Any]]:
        """
        Load a checkpoint.

        Args:
            path: Checkpoint file
            seed: Seed for the restored agents' sampling streams

        Returns:
            (agent, outer policy or None, metadata)

        Raises:
            CheckpointError: If the file is missing or malformed
            CheckpointVersionMismatchError: If the format version differs
        """
        path = Path(path)
        if not path.exists():
            raise CheckpointError(f"checkpoint not found: {path}")
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            logger.error(f"Checkpoint {path} is not valid JSON: {str(e)}")
            raise CheckpointError(f"checkpoint {path} is not valid JSON: {e}") from e

        version = document.get("version")
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionMismatchError(
                f"checkpoint {path} has version {version}, expected {CHECKPOINT_VERSION}"
            )

        try:
            agent = SacAgent.from_state(document["agent"], seed=seed)
            outer_state = document.get("outer")
            outer = OuterPolicy.from_state(outer_state, seed=seed) if outer_state else None
        except (KeyError, TypeError, ValueError) as e:
            logger.error(f"Malformed checkpoint {path}: {str(e)}")
            raise CheckpointError(f"malformed checkpoint {path}: {e}") from e

        logger.info(f"Checkpoint loaded: {path}")
        return agent, outer, document.get("meta", {})
