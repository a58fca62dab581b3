"""Per-state runtime observables recorded along a trajectory."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, field

import numpy as np

from .energetics import energy_density, phi_transform
from .grid import Field, grad_sq_array, lap_array
from .model import ModelParams

__all__ = ["DiagnosticsRecord", "DiagnosticsSeries", "observe", "lyapunov"]

CSV_COLUMNS = (
    "t",
    "energy",
    "mass",
    "grad_w_sq",
    "ut_sq",
    "sup_u",
    "overshoot",
    "z_h2_proxy",
    "newton_iters",
    "tau",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    energy: float
    mass: float
    grad_w_sq: float
    ut_sq: float
    sup_u: float
    overshoot: float
    z_h2_proxy: float
    newton_iters: int = 0
    tau: float = 0.0
    w_sq: float = 0.0  # ‖w‖², enters the phase-field Lyapunov functional

    def csv_row(self) -> tuple:
        return astuple(self)[: len(CSV_COLUMNS)]


@dataclass
class DiagnosticsSeries:
    """Records of one run plus the constants needed to integrate its dissipation."""

    mobility: float
    eta: float
    sigma_pf: float = 0.0
    records: list[DiagnosticsRecord] = field(default_factory=list)

    def append(self, rec: DiagnosticsRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in r.csv_row()])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def lyapunov(u: np.ndarray, w: np.ndarray, domain, params: ModelParams) -> float:
    """Energy, augmented by ``σ/2 ‖w‖²`` in phase-field mode."""
    e = float(np.sum(energy_density(u, domain, params.delta, params.spec_F, params.spec_a)))
    if params.sigma_pf:
        e += 0.5 * params.sigma_pf * float(np.sum(w * w))
    return e * domain.cell_volume


def observe(t: float, u: Field, w: Field, ut: np.ndarray, params: ModelParams,
            newton_iters: int = 0, tau: float = 0.0) -> DiagnosticsRecord:
    dom = u.domain
    dv = dom.cell_volume
    uv = u.values
    e = float(np.sum(energy_density(uv, dom, params.delta, params.spec_F, params.spec_a)) * dv)
    z = phi_transform(params.spec_a, uv)
    sup = float(np.max(np.abs(uv)))
    return DiagnosticsRecord(
        t=float(t),
        energy=e,
        mass=float(np.mean(uv)),
        grad_w_sq=float(np.sum(grad_sq_array(w.values, dom)) * dv),
        ut_sq=float(np.sum(ut * ut) * dv),
        sup_u=sup,
        overshoot=max(sup - 1.0, 0.0),
        z_h2_proxy=float(np.sum(lap_array(z, dom) ** 2) * dv),
        newton_iters=int(newton_iters),
        tau=float(tau),
        w_sq=float(np.sum(w.values**2) * dv),
    )


