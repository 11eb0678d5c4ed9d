"""
Utility helper functions for the simulator
"""

import hashlib
import json
from pathlib import Path
from typing import Any, List, Union

import numpy as np


class SeedHelper:
    """Helper class for deriving independent, reproducible random streams"""

    @staticmethod
    def derive_seed(seed: int, *salt: Union[str, int]) -> int:
        """Derive a 64-bit sub-seed from a master seed and a salt path"""
        combined = "-".join([str(seed), *[str(s) for s in salt]])
        return int(hashlib.sha256(combined.encode()).hexdigest(), 16) % (2 ** 64)

    @staticmethod
    def rng(seed: int, *salt: Union[str, int]) -> np.random.Generator:
        """Generator for the stream named by salt (the master stream when no salt)"""
        if salt:
            seed = SeedHelper.derive_seed(seed, *salt)
        return np.random.default_rng(seed)


class DataHelper:
    """Helper class for loading input data"""

    @staticmethod
    def load_json_data(file_path: Union[str, Path]) -> Any:
        """Load data from a JSON file"""
        with open(file_path, 'r', encoding='utf-8') as file:
            return json.load(file)

    @staticmethod
    def load_integer_vectors(file_path: Union[str, Path]) -> List[List[int]]:
        """Load one integer vector per line, or a JSON list of vectors"""
        text = Path(file_path).read_text(encoding='utf-8')
        if text.lstrip().startswith('['):
            rows = json.loads(text)
            return [[int(v) for v in (row if isinstance(row, list) else [row])] for row in rows]

        vectors = []
        for line in text.splitlines():
            line = line.split('#', 1)[0].strip()
            if line:
                vectors.append([int(token) for token in line.split()])
        return vectors


class FileHelper:
    """Helper class for file operations"""

    @staticmethod
    def create_directory(path: Union[str, Path]) -> None:
        """Create directory if it doesn't exist"""
        Path(path).mkdir(parents=True, exist_ok=True)

    @staticmethod
    def ensure_parent(file_path: Union[str, Path]) -> Path:
        """Create the parent directory of a file path and return the path"""
        path = Path(file_path)
        if path.parent and str(path.parent) not in ('', '.'):
            path.parent.mkdir(parents=True, exist_ok=True)
        return path
