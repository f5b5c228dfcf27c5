"""
Нелинейность G(x, u)

G(x, u) = sum_p g_p(x) u^p / p, so that g = dG/du = sum_p g_p(x) u^{p-1}.
Every coefficient field is a constant plus a finite real-harmonic expansion.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from src.errors import ConfigError, InvalidParameterError
from src.kleingordon.quadrature import SphereQuadrature, harmonic_row
from src.spectrum.models import ModeId


@dataclass(frozen=True)
class CoefficientField:
    constant: float = 0.0
    harmonics: Tuple[Tuple[int, int, float], ...] = ()

    @property
    def degree(self) -> int:
        return max((j for j, _, _ in self.harmonics), default=0)

    def is_zero(self) -> bool:
        return self.constant == 0 and all(c == 0 for _, _, c in self.harmonics)

    def values(self, table: np.ndarray) -> np.ndarray:
        """Field at the nodes, table being the harmonic table on those nodes."""
        out = np.full(table.shape[1:], float(self.constant))
        for j, ell, coef in self.harmonics:
            out = out + coef * table[harmonic_row(ModeId(j, ell))]
        return out


@dataclass
class Nonlinearity:
    fields: Dict[int, CoefficientField] = field(default_factory=dict)

    def __post_init__(self):
        self.fields = {int(p): f for p, f in self.fields.items() if not f.is_zero()}
        for p in self.fields:
            if p < 2:
                raise InvalidParameterError(f"power {p}: G must vanish at least to order 2")

    @classmethod
    def power(cls, p: int, constant: float = 1.0) -> "Nonlinearity":
        """G = constant u^p / p."""
        return cls({p: CoefficientField(constant)})

    @classmethod
    def parse(cls, entries: Mapping[str, str]) -> "Nonlinearity":
        """
        INI form: one option per power, 'p = const:c, j:ell:c, ...'.
        """
        fields = {}
        for key, text in entries.items():
            try:
                p = int(key)
            except ValueError:
                raise ConfigError(f"nonlinearity power {key!r} is not an integer")
            constant, harmonics = 0.0, []
            for item in filter(None, (part.strip() for part in text.split(','))):
                parts = item.split(':')
                try:
                    if parts[0] == 'const' and len(parts) == 2:
                        constant += float(parts[1])
                    elif len(parts) == 3:
                        harmonics.append((int(parts[0]), int(parts[1]), float(parts[2])))
                    else:
                        raise ValueError(item)
                except ValueError:
                    raise ConfigError(f"bad nonlinearity term {item!r} for power {p}")
            fields[p] = CoefficientField(constant, tuple(harmonics))
        try:
            return cls(fields)
        except InvalidParameterError as exc:
            raise ConfigError(str(exc))

    @property
    def is_zero(self) -> bool:
        return not self.fields

    @property
    def max_power(self) -> int:
        return max(self.fields, default=0)

    @property
    def vanishing_order(self) -> int:
        return min(self.fields, default=0)

    @property
    def field_degree(self) -> int:
        return max((f.degree for f in self.fields.values()), default=0)

    def field_values(self, quad: SphereQuadrature, table: np.ndarray) -> Dict[int, np.ndarray]:
        if table.shape[-1] != quad.size:
            raise InvalidParameterError("harmonic table does not match the quadrature nodes")
        return {p: f.values(table) for p, f in self.fields.items()}

    def derivative(self, q: int, values: Dict[int, np.ndarray], u: np.ndarray) -> np.ndarray:
        """d^q G / du^q at (x, u); values are the fields at the nodes x."""
        out = np.zeros(np.shape(u))
        for p, g in values.items():
            if q > p:
                continue
            factor = math.factorial(p) / (p * math.factorial(p - q))
            out = out + factor * g * u ** (p - q)
        return out
