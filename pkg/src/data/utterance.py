from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..utils.exceptions import DataLoadingError

@dataclass
class Utterance:
    """A mono waveform, optionally with its noise-class label and clean reference."""
    samples: np.ndarray
    sample_rate: int
    label: Optional[int] = None
    clean_ref: Optional[np.ndarray] = None
    name: str = ''
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise DataLoadingError(f"Utterance '{self.name}' must be mono, got shape {self.samples.shape}.")
        if self.sample_rate <= 0:
            raise DataLoadingError(f"Utterance '{self.name}' has invalid sample rate {self.sample_rate}.")
        if self.clean_ref is not None:
            self.clean_ref = np.asarray(self.clean_ref, dtype=np.float64)
            if self.clean_ref.shape != self.samples.shape:
                raise DataLoadingError(
                    f"Utterance '{self.name}': clean reference has {self.clean_ref.size} samples, "
                    f"mixture has {self.samples.size}.")

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    def __len__(self):
        return self.samples.size
