"""Exception hierarchy shared by all modules."""


class BlindInvError(Exception):
    """Base class; carries a short machine-readable ``code``."""

    code = "error"

    def to_record(self) -> dict:
        return {"error": self.code, "message": str(self)}


class DegenerateInputError(BlindInvError, ValueError):
    code = "degenerate_input"


class ConfigError(BlindInvError, ValueError):
    code = "config"


class TooFewFramesError(BlindInvError, ValueError):
    code = "too_few_frames"


class RankDeficiencyError(BlindInvError, ValueError):
    code = "rank_deficient"


class NotSPDError(BlindInvError, ValueError):
    code = "not_spd"


class SpeakerSetMismatchError(BlindInvError, ValueError):
    code = "speaker_set_mismatch"
