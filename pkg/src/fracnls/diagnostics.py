"""Conserved quantities and timeline records."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .nonlinearity import NonVanishingError, NonlinearitySpec, big_n_values
from .norms import certified_infimum, sobolev_norm_spectral
from .spectral import SpectralField, oversample


@dataclass(frozen=True)
class ConservationRecord:
    t: float
    mass: float
    energy: float
    h_j_norm: float
    inf_bound: float
    eta_times_inf: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def mass(F: SpectralField) -> float:
    return float((2 * np.pi) ** F.grid.dim * np.sum(np.abs(F.coeffs) ** 2))


def kinetic_energy(F: SpectralField, s: float) -> float:
    return float(0.5 * (2 * np.pi) ** F.grid.dim * np.sum(F.grid.symbol(s) * np.abs(F.coeffs) ** 2))


def potential_energy(F: SpectralField, spec: NonlinearitySpec, oversample_factor: int = 4) -> complex:
    """Quadrature of the antiderivative of N(v)v at |u| on the refined grid."""
    fine = oversample(F, oversample_factor)
    mod = np.abs(fine.samples)
    if spec.singular:
        if certified_infimum(F, max(2, oversample_factor)) <= 0:
            raise NonVanishingError(f"energy of {spec.label} needs a field with positive infimum")
    vals = big_n_values(spec, mod)
    return complex(np.sum(vals) * fine.grid.spacing ** F.grid.dim)


def energy(F: SpectralField, spec: NonlinearitySpec, s: float, oversample_factor: int = 4) -> float:
    """Kinetic part minus the potential integral; the real part for complex series."""
    return kinetic_energy(F, s) - float(np.real(potential_energy(F, spec, oversample_factor)))


def conservation_expected(spec: NonlinearitySpec) -> bool:
    return spec.is_real


def record(t: float, F: SpectralField, spec: NonlinearitySpec, s: float, J: int, eta: float | None, oversample_factor: int = 4) -> ConservationRecord:
    inf = certified_infimum(F, max(2, oversample_factor))
    return ConservationRecord(
        t=float(t),
        mass=mass(F),
        energy=energy(F, spec, s, oversample_factor),
        h_j_norm=sobolev_norm_spectral(F, J),
        inf_bound=inf,
        eta_times_inf=(eta * inf) if eta is not None else math.nan,
    )


def timeline(trajectory, spec: NonlinearitySpec, s: float, J: int, oversample_factor: int = 4) -> list[ConservationRecord]:
    return [
        record(t, F, spec, s, J, eta, oversample_factor)
        for t, F, eta in zip(trajectory.times, trajectory.fields, trajectory.etas)
    ]


def drift(records: list[ConservationRecord]) -> dict:
    m0, e0 = records[0].mass, records[0].energy
    dm = max(abs(r.mass - m0) for r in records)
    de = max(abs(r.energy - e0) for r in records)
    return {
        "mass_abs": dm,
        "mass_rel": dm / m0 if m0 else dm,
        "energy_abs": de,
        "energy_rel": de / abs(e0) if e0 else de,
    }


def timeline_csv(records: list[ConservationRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ConservationRecord.header())
    for r in records:
        writer.writerow([repr(v) for v in asdict(r).values()])
    return buf.getvalue()


def read_timeline_csv(text: str) -> list[ConservationRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [ConservationRecord(**{k: float(v) for k, v in row.items()}) for row in rows]
