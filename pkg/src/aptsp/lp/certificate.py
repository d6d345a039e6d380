"""Exact verification of dual certificates, and rounding of float duals into certificates.

A certificate is accepted only if every dual row holds in exact rational
arithmetic after each transcendental coefficient is replaced by a directed
enclosure: upper bounds on the left, lower bounds on the right.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .exact import dyadic_floor, exp_bounds, fraction_str, to_fraction
from .mrr import MrrLpConfig
from .sampling import SamplingLpConfig

SAFETY = Fraction(1, 10**6)

Key = tuple[int, ...]


class CertificateError(ValueError):
    """Malformed certificate (wrong kind, bad keys, negative entries)."""


@dataclass
class DualCertificate:
    kind: str  # sampling | mrr
    config: SamplingLpConfig | MrrLpConfig
    x: dict[Key, Fraction] = field(default_factory=dict)
    y: Fraction | dict[Key, Fraction] = Fraction(0)
    v: dict[Key, Fraction] = field(default_factory=dict)
    w: dict[Key, Fraction] = field(default_factory=dict)
    z: dict[Key, Fraction] | None = None

    def to_json(self) -> dict:
        def enc(d):
            return {",".join(map(str, k)): fraction_str(q) for k, q in sorted(d.items()) if q}

        out = {"kind": self.kind, "config": self.config.to_json(), "x": enc(self.x),
               "y": fraction_str(self.y) if self.kind == "sampling" else enc(self.y),
               "v": enc(self.v), "w": enc(self.w)}
        if self.z is not None:
            out["z"] = enc(self.z)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "DualCertificate":
        kind = data.get("kind")
        if kind not in ("sampling", "mrr"):
            raise CertificateError(f"unknown certificate kind {kind!r}")

        def dec(d):
            if d is None:
                return None
            if not isinstance(d, Mapping):
                raise CertificateError("certificate vectors must be objects keyed by index")
            try:
                return {tuple(int(t) for t in str(k).split(",")): to_fraction(q)
                        for k, q in d.items()}
            except (ValueError, ZeroDivisionError) as exc:
                raise CertificateError(f"bad certificate entry: {exc}") from None

        try:
            if kind == "sampling":
                cfg = SamplingLpConfig.from_json(data["config"])
                y = to_fraction(data.get("y", 0))
            else:
                cfg = MrrLpConfig.from_json(data["config"])
                y = dec(data.get("y", {}))
        except (KeyError, ValueError, TypeError, ZeroDivisionError) as exc:
            raise CertificateError(f"bad certificate header: {exc}") from None
        return cls(kind, cfg, dec(data.get("x", {})), y, dec(data.get("v", {})),
                   dec(data.get("w", {})), dec(data.get("z")))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "DualCertificate":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class VerificationResult:
    ok: bool
    bound: Fraction | None = None
    row: str | None = None
    margin: Fraction | None = None
    message: str = ""

    @property
    def finite(self) -> bool:
        return self.bound is not None

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "bound": float(self.bound) if self.bound is not None else None,
                "bound_exact": fraction_str(self.bound) if self.bound is not None else None,
                "violated_row": self.row,
                "margin": float(self.margin) if self.margin is not None else None,
                "message": self.message}


def _violation(row: str, lhs: Fraction, rhs: Fraction, rel: str = "<=") -> VerificationResult:
    margin = lhs - rhs
    return VerificationResult(False, None, row, margin,
                              f"row {row}: lhs exceeds rhs by {float(margin):.3e}"
                              if rel == "<=" else f"row {row}: equality off by {float(margin):.3e}")


def _check_keys(name: str, d: Mapping[Key, Fraction], valid) -> None:
    for k, q in d.items():
        if not valid(k):
            raise CertificateError(f"{name} has out-of-range index {k}")
        if q < 0:
            raise CertificateError(f"{name}{list(k)} is negative")


# -- sampling family -----------------------------------------------------------

class _SamplingEnclosures:
    def __init__(self, cfg: SamplingLpConfig):
        self.cfg = cfg
        sb = cfg.sigma * cfg.beta
        self.sb = sb
        n = cfg.n_buckets
        # e^{-m sb} enclosures for m = -1 .. 2N
        self.up = {m: exp_bounds(-m * sb)[1] for m in range(-1, 2 * n + 1)}
        self.rhs = [exp_bounds(-(2 * k + 1) * cfg.beta / 2)[0] for k in range(n + 1)]
        # delta terms, upper bounds
        big_lo = exp_bounds(n * sb)[0]
        small_lo = exp_bounds(sb)[0]
        geo_up = 1 / (big_lo * (small_lo - 1))
        self.delta1 = 4 * cfg.beta * geo_up
        q_lo, q_hi = exp_bounds(-sb)
        tail_up = exp_bounds(-n * sb)[1]
        self.delta2 = ((cfg.alpha + 2 * cfg.beta * geo_up) * tail_up / (1 - q_hi) ** 2
                       * (1 + n - q_lo * n))


def _sampling_rows(cert: DualCertificate, enc: _SamplingEnclosures):
    """Exact LHS of every per-k row and the homogeneous-row coefficients."""
    cfg = cert.config
    n = cfg.n_buckets
    y = cert.y
    lhs = [(cfg.alpha + enc.delta1) * enc.up[k - 1] * y for k in range(n + 1)]
    if n >= 1:
        lhs[1] += enc.delta2 * y
    for (i, j), q in cert.v.items():
        lhs[i] += q
    for (i, j), q in cert.w.items():
        lhs[j] += q
    for (i, j), q in cert.x.items():
        lhs[i] += q
        lhs[j] += q
        lhs[i + j] -= q
    return lhs


def _validate_sampling(cert: DualCertificate) -> None:
    if cert.kind != "sampling" or not isinstance(cert.config, SamplingLpConfig):
        raise CertificateError("expected a sampling certificate")
    n = cert.config.n_buckets
    if not isinstance(cert.y, Fraction) or cert.y < 0:
        raise CertificateError("y must be a nonnegative scalar")
    _check_keys("x", cert.x, lambda k: len(k) == 2 and 1 <= k[0] <= k[1] and k[0] + k[1] <= n)
    inside = lambda k: len(k) == 2 and 0 <= k[0] <= k[1] <= n  # noqa: E731
    _check_keys("v", cert.v, inside)
    _check_keys("w", cert.w, inside)


def verify_sampling_certificate(cfg: SamplingLpConfig, cert: DualCertificate
                                ) -> VerificationResult:
    """Check dual feasibility exactly; on success the bound is sigma^2 / y."""
    _validate_sampling(cert)
    if cert.config != cfg:
        raise CertificateError("certificate was produced for a different configuration")
    enc = _SamplingEnclosures(cfg)
    n, y = cfg.n_buckets, cert.y
    coef = {s: 4 * cfg.beta * enc.up[s - 1] * y for s in range(2 * n + 1)}
    zero = Fraction(0)
    for j in range(n + 1):
        for i in range(j + 1):
            rhs = cert.v.get((i, j), zero) + cert.w.get((i, j), zero)
            if coef[i + j] > rhs:
                return _violation(f"m_{i}_{j}", coef[i + j], rhs)
    for k, lhs in enumerate(_sampling_rows(cert, enc)):
        if lhs > enc.rhs[k]:
            return _violation(f"k_{k}", lhs, enc.rhs[k])
    if y == 0:
        return VerificationResult(True, None, message="feasible, but y = 0 gives no finite bound")
    bound = cfg.sigma**2 / y
    return VerificationResult(True, bound, message=f"bound {float(bound):.6f}")


def sampling_certificate_from_values(cfg: SamplingLpConfig, values: Mapping[str, float],
                                     safety: Fraction = SAFETY) -> DualCertificate:
    """Round a float solution of the dual LP (keyed by variable name) into a feasible certificate.

    Entries become exact binary rationals, negative noise is dropped, the
    homogeneous rows are repaired by raising ``v``, and everything is scaled
    down until each remaining row holds with the enclosed right-hand sides.
    """
    def grab(prefix):
        out = {}
        for name, val in values.items():
            if name.startswith(prefix) and val > 0:
                out[tuple(int(t) for t in name[len(prefix):].split("_"))] = Fraction(float(val))
        return out

    n = cfg.n_buckets
    y = Fraction(max(0.0, float(values.get("y", 0.0))))
    cert = DualCertificate("sampling", cfg, grab("x_"), y, grab("v_"), grab("w_"))
    _validate_sampling(cert)
    enc = _SamplingEnclosures(cfg)
    zero = Fraction(0)
    for j in range(n + 1):
        for i in range(j + 1):
            need = 4 * cfg.beta * enc.up[i + j - 1] * y
            have = cert.v.get((i, j), zero) + cert.w.get((i, j), zero)
            if need > have:
                cert.v[i, j] = cert.v.get((i, j), zero) + (need - have)
    scale = _safe_scale(_sampling_rows(cert, enc), enc.rhs, safety)
    _scale_certificate(cert, scale)
    return cert


# -- master route ratio family ------------------------------------------------

def _validate_mrr(cert: DualCertificate) -> None:
    if cert.kind != "mrr" or not isinstance(cert.config, MrrLpConfig):
        raise CertificateError("expected an mrr certificate")
    cfg = cert.config
    n, a = cfg.n_buckets, cfg.a
    if not isinstance(cert.y, dict):
        raise CertificateError("y must be a vector keyed by bucket")
    _check_keys("x", cert.x, lambda k: len(k) == 1 and 2 <= k[0] <= n)
    _check_keys("y", cert.y, lambda k: len(k) == 1 and 1 <= k[0] <= n)
    pair = lambda k: len(k) == 2 and 1 <= k[1] <= n and 1 <= k[0] <= cfg.n_pairs(k[1])  # noqa: E731
    _check_keys("v", cert.v, pair)
    _check_keys("w", cert.w, pair)
    if cert.z is not None:
        for k in cert.z:
            if len(k) != 1 or not -a <= k[0] <= n:
                raise CertificateError(f"z has out-of-range index {k}")


def mrr_interval_loads(cert: DualCertificate) -> dict[int, Fraction]:
    """The sums of v and w attached to each interval, which the z entries must equal."""
    cfg = cert.config
    loads = {k: Fraction(0) for k in range(-cfg.a, cfg.n_buckets + 1)}
    for (j, i), q in cert.v.items():
        loads[cfg.pair_indices(i, j)[0]] += q
    for (j, i), q in cert.w.items():
        loads[cfg.pair_indices(i, j)[1]] += q
    return loads


def _mrr_rows(cert: DualCertificate, z: Mapping[int, Fraction]) -> list[Fraction]:
    cfg = cert.config
    n, a = cfg.n_buckets, cfg.a
    zero = Fraction(0)
    y = {k[0]: q for k, q in cert.y.items()}
    x = {k[0]: q for k, q in cert.x.items()}
    # sliding window over z_{i-a} .. z_i
    window = sum((z.get(k, zero) for k in range(-a, 1)), zero)
    lhs = []
    for i in range(n + 1):
        if i > 0:
            window += z.get(i, zero) - z.get(i - a - 1, zero)
        row = y.get(i, zero) + window
        if i == 1:
            row += sum((j * q for j, q in x.items()), zero)
        if i >= 2:
            row -= x.get(i, zero)
        lhs.append(row)
    return lhs


def _mrr_rhs(cfg: MrrLpConfig) -> list[Fraction]:
    return [exp_bounds(-(2 * i + 1) * cfg.beta / 2)[0] for i in range(cfg.n_buckets + 1)]


def verify_mrr_certificate(cfg: MrrLpConfig, cert: DualCertificate) -> VerificationResult:
    """Check dual feasibility exactly; on success the bound is 1 / sum_i i beta^2 y_i.

    A certificate without ``z`` gets the z values implied by its equality rows.
    """
    _validate_mrr(cert)
    if cert.config != cfg:
        raise CertificateError("certificate was produced for a different configuration")
    zero = Fraction(0)
    two_beta = 2 * cfg.beta
    for i in range(1, cfg.n_buckets + 1):
        need = two_beta * cert.y.get((i,), zero)
        for j in range(1, cfg.n_pairs(i) + 1):
            have = cert.v.get((j, i), zero) + cert.w.get((j, i), zero)
            if need > have:
                return _violation(f"m_{j}_{i}", need, have)
    loads = mrr_interval_loads(cert)
    if cert.z is None:
        z = loads
    else:
        z = {k[0]: q for k, q in cert.z.items()}
        for k, load in loads.items():
            if z.get(k, zero) != load:
                return _violation(f"z_{k}", z.get(k, zero), load, "=")
    rhs = _mrr_rhs(cfg)
    for i, lhs in enumerate(_mrr_rows(cert, z)):
        if lhs > rhs[i]:
            return _violation(f"b_{i}", lhs, rhs[i])
    total = sum((i * cfg.beta**2 * q for (i,), q in cert.y.items()), zero)
    if total == 0:
        return VerificationResult(True, None, message="feasible, but the objective is 0")
    bound = 1 / total
    return VerificationResult(True, bound, message=f"bound {float(bound):.6f}")


def mrr_certificate_from_values(cfg: MrrLpConfig, values: Mapping[str, float],
                                safety: Fraction = SAFETY) -> DualCertificate:
    """Round a float solution of the MRR dual LP into a feasible certificate (z derived exactly)."""
    def grab(prefix):
        out = {}
        for name, val in values.items():
            if name.startswith(prefix) and val > 0:
                out[tuple(int(t) for t in name[len(prefix):].split("_"))] = Fraction(float(val))
        return out

    cert = DualCertificate("mrr", cfg, grab("x_"), grab("y_"), grab("v_"), grab("w_"))
    _validate_mrr(cert)
    zero = Fraction(0)
    for i in range(1, cfg.n_buckets + 1):
        need = 2 * cfg.beta * cert.y.get((i,), zero)
        for j in range(1, cfg.n_pairs(i) + 1):
            have = cert.v.get((j, i), zero) + cert.w.get((j, i), zero)
            if need > have:
                cert.v[j, i] = cert.v.get((j, i), zero) + (need - have)
    loads = mrr_interval_loads(cert)
    scale = _safe_scale(_mrr_rows(cert, loads), _mrr_rhs(cfg), safety)
    _scale_certificate(cert, scale)
    cert.z = {(k,): q for k, q in mrr_interval_loads(cert).items() if q}
    return cert


# -- shared -----------------------------------------------------------------

def _safe_scale(lhs: list[Fraction], rhs: list[Fraction], safety: Fraction) -> Fraction:
    scale = 1 - safety
    for l_k, r_k in zip(lhs, rhs):
        if l_k > 0 and r_k < scale * l_k:
            scale = r_k / l_k
    return dyadic_floor(scale, 64)


def _scale_certificate(cert: DualCertificate, s: Fraction) -> None:
    for name in ("x", "v", "w"):
        setattr(cert, name, {k: q * s for k, q in getattr(cert, name).items()})
    if isinstance(cert.y, dict):
        cert.y = {k: q * s for k, q in cert.y.items()}
    else:
        cert.y = cert.y * s


def verify_certificate(cert: DualCertificate) -> VerificationResult:
    if cert.kind == "sampling":
        return verify_sampling_certificate(cert.config, cert)
    return verify_mrr_certificate(cert.config, cert)


def certificate_from_values(cfg, values: Mapping[str, float]) -> DualCertificate:
    if isinstance(cfg, SamplingLpConfig):
        return sampling_certificate_from_values(cfg, values)
    return mrr_certificate_from_values(cfg, values)
