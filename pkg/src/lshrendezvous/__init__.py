"""Locality-sensitive-hashing channel hopping for the multichannel rendezvous problem."""

from .core import (
    ChannelSet,
    InfeasibleSpecError,
    InvalidInstanceError,
    Permutation,
    PrivateRandomness,
    ProblemInstance,
    SharedRandomness,
    intersection_size,
    make_permutation,
)

__version__ = "0.1.0"
