"""
Streams de números aleatórios nomeados.
Cada propósito recebe um gerador Philox independente derivado da mesma semente,
de modo que cada componente pode ser reproduzido isoladamente.
"""

import hashlib
from enum import IntEnum
from typing import Union

import numpy as np


class Stream(IntEnum):
    """Propósitos com stream próprio."""
    FEATURES = 0
    BETAS = 1
    CHOICES = 2
    ORACLE = 3
    SPLIT = 4
    INIT = 5
    TRAIN_DRAWS = 6
    EVAL_DRAWS = 7
    DROPOUT = 8


# Menor uniforme usado; mantém Φ⁻¹(u) e u^m finitos.
UNIFORM_FLOOR = 2.0 ** -53


def stream(seed: int, purpose: Union[Stream, int], *sub: int) -> np.random.Generator:
    """Gerador Philox para (semente, propósito, subchaves opcionais)."""
    key = (int(purpose),) + tuple(int(s) for s in sub)
    seq = np.random.SeedSequence(entropy=int(seed) & (2 ** 64 - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def open_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniformes no intervalo aberto (0, 1)."""
    return np.clip(rng.random(shape), UNIFORM_FLOOR, 1.0 - UNIFORM_FLOOR)


def derive_seed(*parts: Union[int, str]) -> int:
    """Hash estável de 64 bits das partes (não depende de PYTHONHASHSEED)."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & (2 ** 63 - 1)
