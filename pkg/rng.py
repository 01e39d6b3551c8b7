"""
Seeded random streams.

Every run owns private streams derived from the master seed and a list of labels.
Rule (version ``philox-sha256-v1``): the labels are joined with ``|`` after the rule
version and the master seed, hashed with SHA-256, and the first 16 bytes become the
two little-endian 64-bit key words of a counter-based Philox generator.
"""
import hashlib

import numpy as np

RNG_RULE_VERSION = "philox-sha256-v1"


def stream_key(master_seed: int, *labels) -> np.ndarray:
    """
    Compute the Philox key for a labelled stream

    Args:
        master_seed: Experiment-wide 64-bit seed
        *labels: Values identifying the stream (environment, algorithm, ...)

    Returns:
        Array of two uint64 key words
    """
    text = "|".join([RNG_RULE_VERSION, str(int(master_seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype="<u8").copy()


def derive_stream(master_seed: int, *labels) -> np.random.Generator:
    """Return an independent generator for the given labels"""
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, *labels)))


def seeded_stream(seed: int) -> np.random.Generator:
    """Generator for a bare integer seed (tests, CLI validation suites)"""
    return derive_stream(seed)
