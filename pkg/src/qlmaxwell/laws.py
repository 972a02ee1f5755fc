"""Material laws (theta, chi, sigma, zeta) and the law registry.

Every law function is written with plain array operators so it also accepts
:class:`~qlmaxwell.jets.Taylor` arguments; coefficient time-jets come for free.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import BOTTOM_NORMAL
from .errors import ConfigInvalid, LawInvalid
from .jets import Taylor

_PE = np.vstack([np.eye(3), np.zeros((3, 3))])  # (6, 3) embeds E
_PH = np.vstack([np.zeros((3, 3)), np.eye(3)])  # (6, 3) embeds H
_EBLOCK = _PE @ _PE.T
_HBLOCK = _PH @ _PH.T


@dataclass(frozen=True)
class DomainShape:
    """Open convex state set: 'ball' {|u|<r}, 'e-ball' {|E|<r} (slab in E), 'whole'."""

    kind: str = "whole"
    radius: float = np.inf

    def __post_init__(self):
        if self.kind not in ("ball", "e-ball", "whole"):
            raise ConfigInvalid(f"unknown domain shape {self.kind!r}", key="law.params.domain")

    def _size(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if self.kind == "e-ball":
            return np.linalg.norm(u[..., :3], axis=-1)
        return np.linalg.norm(u, axis=-1)

    def distance(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "whole":
            return np.full(np.asarray(u).shape[:-1], np.inf)
        return self.radius - self._size(u)

    def contains(self, u: np.ndarray) -> np.ndarray:
        return self.distance(u) > 0

    def trace_admissible(self, xi: np.ndarray) -> np.ndarray:
        # |E x nu| <= |E|, so the trace set of either ball is the ball itself
        xi = np.asarray(xi)
        if self.kind == "whole":
            return np.ones(xi.shape[:-1], dtype=bool)
        return np.linalg.norm(xi, axis=-1) < self.radius


@dataclass(frozen=True)
class MaterialLaw:
    name: str
    theta: Callable
    chi: Callable
    sigma: Callable
    zeta: Callable
    eta: float
    domain: DomainShape
    params: dict = field(default_factory=dict)
    zeta_state_dependent: bool = False
    state_dependent: bool = True
    max_order: int = 64  # derivative order available for chi, sigma, zeta

    @property
    def is_linear(self) -> bool:
        return not self.state_dependent and not self.zeta_state_dependent


def _const(M: np.ndarray, lead_shape) -> np.ndarray:
    return np.broadcast_to(M, tuple(lead_shape) + M.shape)


def make_linear(eps: float = 1.0, mu: float = 1.0, sigma: float = 0.0, zeta0: float = 1.0,
                r_star: float = np.inf, domain: str = "whole") -> MaterialLaw:
    C = eps * _EBLOCK + mu * _HBLOCK
    S = sigma * _EBLOCK
    dom = DomainShape(domain if np.isfinite(r_star) else "whole", r_star)
    return MaterialLaw(
        name="linear",
        theta=lambda x, u: u @ C,
        chi=lambda x, u: _const(C, u.shape[:-1]),
        sigma=lambda x, u: _const(S, u.shape[:-1]),
        zeta=lambda x, xi: _const(zeta0 * np.eye(3), xi.shape[:-1]),
        eta=float(min(eps, mu, zeta0)),
        domain=dom,
        params=dict(eps=eps, mu=mu, sigma=sigma, zeta0=zeta0, r_star=r_star),
        zeta_state_dependent=False,
        state_dependent=False,
    )


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _kerr_chi(base: np.ndarray, alpha: float, u):
    """base + alpha (|E|^2 I + 2 E E^T) on the E block."""
    E = u[..., :3]
    s = (E * E).sum(-1)
    if isinstance(u, Taylor):
        return base + alpha * (s[..., None, None] * _EBLOCK + 2.0 * (_PE @ _outer(E, E) @ _PE.T))
    out = np.empty(E.shape[:-1] + (6, 6))
    out[...] = base
    out[..., :3, :3] += alpha * (s[..., None, None] * np.eye(3) + 2.0 * _outer(E, E))
    return out


def make_kerr(eps: float = 1.0, mu: float = 1.0, alpha: float = 1.0, sigma: float = 0.0,
              zeta0: float = 1.0, beta: float = 1.0, r_star: float = 0.5,
              domain: str = "e-ball") -> MaterialLaw:
    """theta_e(E) = eps E + alpha |E|^2 E, theta_m(H) = mu H, zeta = zeta0 I + beta xi xi^T."""
    S = sigma * _EBLOCK
    eta = min(eps, mu, zeta0)
    if alpha < 0:
        eta = min(eta, eps - 3.0 * abs(alpha) * r_star ** 2)
    if beta < 0:
        eta = min(eta, zeta0 - abs(beta) * r_star ** 2)
    if not eta > 0:
        raise ConfigInvalid("kerr parameters give a non-positive eta on U", key="law.params")

    def theta(x, u):
        E, H = u[..., :3], u[..., 3:]
        s = (E * E).sum(-1)
        return (eps * E + alpha * s[..., None] * E) @ _PE.T + (mu * H) @ _PH.T

    base = eps * _EBLOCK + mu * _HBLOCK

    def chi(x, u):
        return _kerr_chi(base, alpha, u)

    def zeta(x, xi):
        if beta == 0:
            return _const(zeta0 * np.eye(3), xi.shape[:-1])
        return zeta0 * np.eye(3) + beta * _outer(xi, xi)

    return MaterialLaw(
        name="kerr", theta=theta, chi=chi,
        sigma=lambda x, u: _const(S, u.shape[:-1]),
        zeta=zeta, eta=float(eta), domain=DomainShape(domain, r_star),
        params=dict(eps=eps, mu=mu, alpha=alpha, sigma=sigma, zeta0=zeta0, beta=beta, r_star=r_star),
        zeta_state_dependent=beta != 0, state_dependent=alpha != 0,
    )


def make_aniso_demo(eps=(1.0, 1.5, 2.0), mu=(1.0, 1.2, 1.0), alpha: float = 0.5,
                    sigma: float = 0.1, zeta0: float = 1.0, gamma: float = 0.5,
                    r_star: float = 0.5) -> MaterialLaw:
    """Anisotropic Kerr-type law with field-dependent conductivity.

    theta_e = diag(eps) E + alpha |E|^2 E, sigma_e = sigma (1 + |E|^2) I,
    zeta = (zeta0 + gamma |xi|^2) I.
    """
    Ce = np.diag(np.asarray(eps, float))
    Cm = np.diag(np.asarray(mu, float))
    base = _PE @ Ce @ _PE.T + _PH @ Cm @ _PH.T
    eta = float(min(min(eps), min(mu), zeta0))

    def theta(x, u):
        E, H = u[..., :3], u[..., 3:]
        s = (E * E).sum(-1)
        return (E @ Ce + alpha * s[..., None] * E) @ _PE.T + (H @ Cm) @ _PH.T

    def chi(x, u):
        return _kerr_chi(base, alpha, u)

    def sig(x, u):
        E = u[..., :3]
        s = (E * E).sum(-1)
        return sigma * (1.0 + s)[..., None, None] * _EBLOCK

    def zeta(x, xi):
        s = (xi * xi).sum(-1)
        return (zeta0 + gamma * s)[..., None, None] * np.eye(3)

    return MaterialLaw(
        name="aniso-demo", theta=theta, chi=chi, sigma=sig, zeta=zeta, eta=eta,
        domain=DomainShape("e-ball", r_star),
        params=dict(eps=list(eps), mu=list(mu), alpha=alpha, sigma=sigma, zeta0=zeta0,
                    gamma=gamma, r_star=r_star),
        zeta_state_dependent=gamma != 0, state_dependent=True,
    )


LAW_REGISTRY: dict[str, Callable[..., MaterialLaw]] = {
    "linear": make_linear,
    "kerr": make_kerr,
    "aniso-demo": make_aniso_demo,
}


def get_law(name: str, params: dict | None = None) -> MaterialLaw:
    if name not in LAW_REGISTRY:
        raise ConfigInvalid(f"unknown law {name!r}; known: {sorted(LAW_REGISTRY)}", key="law.name")
    try:
        return LAW_REGISTRY[name](**(params or {}))
    except TypeError as exc:
        raise ConfigInvalid(f"bad parameters for law {name!r}: {exc}", key="law.params") from exc


# validation -----------------------------------------------------------------
@dataclass
class LawValidation:
    symmetry_defect: float
    chi_min_eig: float
    zeta_min_eig: float
    jacobian_error: float
    jacobian_slope: float
    tangentiality_defect: float
    sigma_block_defect: float
    worst_sample: dict

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _sample_states(law: MaterialLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    r = law.domain.radius if np.isfinite(law.domain.radius) else 1.0
    u = rng.normal(size=(n, 6))
    if law.domain.kind == "e-ball":
        E = u[:, :3]
        E *= (0.95 * r * rng.random(n) ** (1 / 3) / np.linalg.norm(E, axis=1))[:, None]
    else:
        u *= (0.95 * r * rng.random(n) ** (1 / 6) / np.linalg.norm(u, axis=1))[:, None]
    return u


def _fd_jacobian(law: MaterialLaw, x, u, h: float) -> np.ndarray:
    jac = np.zeros(u.shape + (6,))
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        jac[..., :, k] = (law.theta(x, u + e) - law.theta(x, u - e)) / (2 * h)
    return jac


def validate_material_law(law: MaterialLaw, sample_count: int = 200, seed: int = 0,
                          raise_on_failure: bool = True) -> LawValidation:
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    rng = np.random.default_rng(seed)
    u = _sample_states(law, sample_count, rng)
    x = rng.random((sample_count, 3))
    chi = np.asarray(law.chi(x, u))
    sig = np.asarray(law.sigma(x, u))
    sym = float(np.max(np.abs(chi - np.swapaxes(chi, -1, -2))))
    chi_eigs = np.linalg.eigvalsh(0.5 * (chi + np.swapaxes(chi, -1, -2)))
    chi_min = float(chi_eigs.min())

    r = law.domain.radius if np.isfinite(law.domain.radius) else 1.0
    xi = np.zeros((sample_count, 3))
    ang = 2 * np.pi * rng.random(sample_count)
    rad = 0.95 * r * np.sqrt(rng.random(sample_count))
    xi[:, 0], xi[:, 1] = rad * np.cos(ang), rad * np.sin(ang)
    xb = x.copy()
    xb[:, 2] = 0.0
    zeta = np.asarray(law.zeta(xb, xi))
    sym = max(sym, float(np.max(np.abs(zeta - np.swapaxes(zeta, -1, -2)))))
    zeta_min = float(np.linalg.eigvalsh(0.5 * (zeta + np.swapaxes(zeta, -1, -2))).min())
    w = np.zeros((sample_count, 3))
    w[:, 0], w[:, 1] = -np.sin(ang), np.cos(ang)
    tang = float(np.max(np.abs(np.einsum("...ij,...j->...i", zeta, w) @ BOTTOM_NORMAL)))

    errs = [float(np.max(np.abs(chi - _fd_jacobian(law, x, u, h)))) for h in (1e-2, 1e-3)]
    slope = float(np.log10(errs[0] / errs[1])) if errs[1] > 0 and errs[0] > 0 else float("inf")
    sblock = float(np.max(np.abs(sig[..., 3:, 3:])))

    worst = int(np.argmin(chi_eigs.min(axis=-1)))
    report = LawValidation(sym, chi_min, zeta_min, errs[1], slope, tang, sblock,
                           {"u": u[worst].tolist(), "x": x[worst].tolist()})
    scale = max(1.0, float(np.max(np.abs(chi))))
    failed = []
    if sym > 1e-12 * scale:
        failed.append("symmetry")
    if chi_min < law.eta - 1e-12 or zeta_min < law.eta - 1e-12:
        failed.append("positivity")
    if errs[1] > 1e-5 * scale:
        failed.append("jacobian")
    if tang > 1e-12:
        failed.append("tangentiality")
    if sblock > 0:
        failed.append("sigma-block")
    if failed and raise_on_failure:
        raise LawInvalid(f"law {law.name!r} failed checks: {failed}", report=report.as_dict())
    return report
