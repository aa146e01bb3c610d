from .buffer import (Batch, BufferUnderfilledError, PrioritizedReplayBuffer, ReplayBuffer,
                     beta_schedule)
from .nstep import NStepAssembler, NStepRecord, assemble_nstep
from .sumtree import SumTree
