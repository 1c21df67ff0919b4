"""Run configuration and the file-producing pipeline stages.

Every artifact is a deterministic function of the :class:`RunConfig` (minus
the worker count) and embeds the config hash and master seed.
"""

from __future__ import annotations

import hashlib
import json
import math
import shlex
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.stats import binomtest

from .bounds import Certificate
from .divergences import kl_beta
from .rep_optimizer import CostMatrix, certify_finite, optimize_finite, optimize_finite_robust
from .sim.policies import finite_policy_grid, grid_policy_ids
from .sim.rollout import FinitePosterior, cost_matrix, sample_true_costs
from .sim.world import (
    STREAM_TRAIN_ENVS,
    EnvDistribution,
    Environment,
    derive_seed,
    sample_environment,
)
from .trainer import GaussianPosterior, TrainerConfig, certify_continuous, default_prior, train

EXPERIMENTS = ("finite", "continuous", "robust-finite")
ENV_FILE = "envs.json"
COST_FILE = "cost_matrix.csv"
COST_META_FILE = "cost_matrix.meta.json"
CERT_FILE = "certificate.json"
REPORT_FILE = "report.txt"
SWEEP_FILE = "lambda_sweep.csv"
POSTERIOR_FILE = "posterior.json"
VALIDATION_FILE = "validation.json"
CONFIG_FILE = "config.json"


class ConfigError(ValueError):
    pass


class InfeasibleError(RuntimeError):
    pass


@dataclass
class RunConfig:
    experiment: str = "finite"
    train_dist: dict[str, Any] = field(default_factory=lambda: {"variant": "default"})
    test_dist: dict[str, Any] | None = None
    n_envs: int = 100
    delta: float = 0.01
    delta_prime: float = 0.001
    sample_count: int = 30_000
    lambda_grid: int = 100
    budget: float | None = None
    validation_envs: int = 10_000
    seed: int = 0
    trainer: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if int(self.n_envs) != self.n_envs or self.n_envs < 8:
            raise ConfigError("n_envs must be an integer >= 8")
        if not (0 < self.delta < 1 and 0 < self.delta_prime < 1):
            raise ConfigError("delta and delta_prime must lie in (0, 1)")
        if self.experiment == "continuous" and self.delta + self.delta_prime >= 1:
            raise ConfigError("delta + delta_prime must be < 1")
        if self.lambda_grid < 2 or self.sample_count < 1 or self.validation_envs < 1:
            raise ConfigError("lambda_grid >= 2, sample_count >= 1, validation_envs >= 1 required")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.budget is not None and not self.budget >= 0:
            raise ConfigError("budget must be >= 0")
        try:
            self.train_distribution()
            self.test_distribution()
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad environment distribution: {exc}") from exc
        unknown = set(self.trainer) - {"step_size", "iterations", "fd_step", "batch_size",
                                       "prior_x0", "prior_y0", "prior_s0"}
        if unknown:
            raise ConfigError(f"unknown trainer options: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def train_distribution(self) -> EnvDistribution:
        return EnvDistribution.from_dict(self.train_dist)

    def test_distribution(self) -> EnvDistribution:
        return EnvDistribution.from_dict(self.test_dist or self.train_dist)

    def robust_budget(self) -> float:
        """Explicit budget, else KL(test || train) when both are beta-radius variants."""
        if self.budget is not None:
            return float(self.budget)
        tr, te = self.train_distribution(), self.test_distribution()
        if tr.variant == "beta_radius" and te.variant == "beta_radius":
            return kl_beta(te.beta, tr.beta)
        if self.test_dist is None:
            return 0.0
        raise ConfigError("robust run needs 'budget' unless both distributions are beta_radius")

    def trainer_config(self) -> TrainerConfig:
        t = dict(self.trainer)
        prior = default_prior(t.pop("prior_x0", 2.5), t.pop("prior_y0", 10.0),
                              t.pop("prior_s0", 0.01))
        return TrainerConfig(prior=prior, delta=self.delta, delta_prime=self.delta_prime,
                             sample_count=self.sample_count, seed=self.seed, **t)


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _header(cfg: RunConfig, kind: str) -> dict[str, Any]:
    return {"format": f"pacctrl.{kind}/1", "config_hash": cfg.digest(), "seed": cfg.seed}


def write_config(cfg: RunConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / CONFIG_FILE
    path.write_text(dump_json(cfg.to_dict()))
    return path


def gen_envs(cfg: RunConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    dist = cfg.train_distribution()
    records = []
    for i in range(cfg.n_envs):
        env = sample_environment(dist, derive_seed(cfg.seed, STREAM_TRAIN_ENVS, i))
        records.append({"id": f"env{i}", **env.to_dict()})
    doc = {**_header(cfg, "environments"), "distribution": dist.to_dict(), "environments": records}
    path = out / ENV_FILE
    path.write_text(dump_json(doc))
    return path


def load_envs(path) -> tuple[list[str], list[Environment], dict[str, Any]]:
    doc = json.loads(Path(path).read_text())
    ids = [r["id"] for r in doc["environments"]]
    envs = [Environment.from_dict(r) for r in doc["environments"]]
    return ids, envs, doc


def make_cost_matrix(cfg: RunConfig, env_path: Path, out: Path, workers: int = 1) -> Path:
    ids, envs, doc = load_envs(env_path)
    cm = cost_matrix(envs, finite_policy_grid(), workers=workers, env_ids=ids,
                     policy_ids=grid_policy_ids())
    out.mkdir(parents=True, exist_ok=True)
    path = out / COST_FILE
    text = cm.to_csv()
    path.write_text(text)
    meta = {**_header(cfg, "cost_matrix"), "environments_file": env_path.name,
            "environments_hash": doc["config_hash"], "policies": "finite-grid-5x10",
            "csv_sha256": hashlib.sha256(text.encode()).hexdigest()}
    (out / COST_META_FILE).write_text(dump_json(meta))
    return path


def _write_sweep(rows, path: Path) -> None:
    lines = ["lambda,radius,tau,objective"]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def certify(cfg: RunConfig, out: Path, cost_path: Path | None = None, env_path: Path | None = None,
            workers: int = 1, replay: str = "") -> Certificate:
    """Optimize and certify per ``cfg.experiment``; writes certificate + report.

    Raises :class:`InfeasibleError` after writing the artifacts if no lambda
    on the grid admits a feasible posterior.
    """
    out.mkdir(parents=True, exist_ok=True)
    test_dist = cfg.test_distribution()
    if cfg.experiment in ("finite", "robust-finite"):
        cm = CostMatrix.load(cost_path or out / COST_FILE)
        if cm.n_envs < 8:
            raise ConfigError("certification needs at least 8 environments")
        p0 = np.full(cm.n_policies, 1.0 / cm.n_policies)
        if cfg.experiment == "finite":
            sol = optimize_finite(cm, p0, cfg.delta, cfg.lambda_grid)
            cert = certify_finite(sol, cm, p0, cfg.delta)
        else:
            sol, cert = optimize_finite_robust(cm, p0, cfg.delta, cfg.robust_budget(),
                                               cfg.lambda_grid)
        _write_sweep(sol.diagnostics, out / SWEEP_FILE)
        cert.extra["policy"] = {"kind": "finite-grid-5x10", "posterior": sol.posterior.tolist()}
        feasible = sol.feasible
    else:
        _, envs, _ = load_envs(env_path or out / ENV_FILE)
        tcfg = cfg.trainer_config()
        post = train(envs, tcfg)
        (out / POSTERIOR_FILE).write_text(dump_json({**_header(cfg, "posterior"),
                                                     **post.to_dict(),
                                                     "prior": tcfg.prior.to_dict()}))
        cert = certify_continuous(post, tcfg.prior, envs, tcfg, workers=workers)
        cert.extra["policy"] = {"kind": "gaussian-symmetric", **post.to_dict()}
        feasible = True

    cert.extra.update(experiment=cfg.experiment, test_distribution=test_dist.to_dict(),
                      replay=replay)
    doc = {**_header(cfg, "certificate"), "certificate": cert.to_dict()}
    (out / CERT_FILE).write_text(dump_json(doc))
    (out / REPORT_FILE).write_text(format_report(doc))
    if not feasible:
        raise InfeasibleError("no lambda on the grid gives a feasible posterior; "
                              "certificate falls back to the prior")
    return cert


def load_certificate(path) -> tuple[Certificate, dict[str, Any]]:
    doc = json.loads(Path(path).read_text())
    return Certificate.from_dict(doc["certificate"]), doc


def posterior_sampler(cert: Certificate):
    pol = cert.extra["policy"]
    if pol["kind"] == "finite-grid-5x10":
        probs = np.asarray(pol["posterior"], dtype=float)
        return FinitePosterior(np.array(finite_policy_grid()), probs / probs.sum())
    if pol["kind"] == "gaussian-symmetric":
        return GaussianPosterior.from_dict(pol)
    raise ConfigError(f"unknown policy kind {pol['kind']!r}")


def validate(cert_path: Path, M: int, seed: int, out: Path | None = None, workers: int = 1,
             confidence: float = 0.99) -> dict[str, Any]:
    """Monte-Carlo check of a certificate on fresh environments from its test distribution."""
    if int(M) != M or M < 1:
        raise ConfigError("validation needs M >= 1 environments")
    cert, doc = load_certificate(cert_path)
    dist = EnvDistribution.from_dict(cert.extra["test_distribution"])
    costs = sample_true_costs(posterior_sampler(cert), dist, int(M), int(seed), workers=workers)
    k = int(costs.sum())
    est = k / M
    ci = binomtest(k, int(M)).proportion_ci(confidence_level=confidence, method="exact")
    record = {
        "format": "pacctrl.validation/1",
        "config_hash": doc["config_hash"],
        "seed": int(seed),
        "certificate_seed": doc["seed"],
        "test_distribution": dist.to_dict(),
        "M": int(M),
        "failures": k,
        "estimate": est,
        "ci_level": confidence,
        "ci_low": float(ci.low),
        "ci_high": float(ci.high),
        "bound": cert.bound,
        "confidence": cert.confidence,
        "violation": bool(ci.low > cert.bound),
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / VALIDATION_FILE).write_text(dump_json(record))
    return record


def format_report(doc: dict[str, Any], validation: dict[str, Any] | None = None) -> str:
    c = doc["certificate"]
    extra = c.get("extra", {})
    lines = [
        f"experiment        {extra.get('experiment', '?')}  (method {c['method']})",
        f"config hash       {doc['config_hash']}   master seed {doc['seed']}",
        f"bound             {c['bound']:.6f}  with probability >= {c['confidence']:.4f}"
        f"  over N = {c['n_envs']} training environments",
        f"training cost     {c['train_cost']:.6f}",
        f"KL(posterior||prior) {c['kl']:.6f}",
        f"delta             {c['delta']}",
    ]
    if c.get("delta_prime") is not None:
        lines.append(f"delta'            {c['delta_prime']}  (L = {c['sample_count']} samples, "
                     f"estimated cost {c['est_cost']:.6f})")
    if c.get("budget") is not None:
        lines.append(f"robust budget B   {c['budget']:.6f}")
    lam = extra.get("lambda_star")
    if lam is not None:
        lines.append(f"lambda*           {'n/a' if lam is None or math.isnan(lam) else f'{lam:.6f}'}")
    if c.get("vacuous"):
        lines.append("NOTE: bound is vacuous (>= 1)")
    if extra.get("feasible") is False:
        lines.append("WARNING: no feasible lambda; posterior fell back to the prior")
    if validation is not None:
        v = validation
        lines.append(f"validation        estimate {v['estimate']:.6f} over M = {v['M']} "
                     f"({int(100 * v['ci_level'])}% CI [{v['ci_low']:.6f}, {v['ci_high']:.6f}])"
                     f" -> {'VIOLATION' if v['violation'] else 'ok'}")
    if extra.get("replay"):
        lines.append(f"replay (from the output directory)  {extra['replay']}")
    return "\n".join(lines) + "\n"


def replay_command(config_path: Path) -> str:
    """Replay command, run from inside the output directory so artifacts stay path-free."""
    return f"pacctrl run --config {shlex.quote(config_path.name)} --out ."


def run_all(cfg: RunConfig, out: Path, workers: int = 1, validate_m: int | None = None,
            validation_seed: int | None = None) -> dict[str, Any]:
    """Every stage in order; returns the validation record."""
    cfg_path = write_config(cfg, out)
    env_path = gen_envs(cfg, out)
    if cfg.experiment != "continuous":
        make_cost_matrix(cfg, env_path, out, workers)
    certify(cfg, out, workers=workers, replay=replay_command(cfg_path))
    m = validate_m if validate_m is not None else cfg.validation_envs
    return validate(out / CERT_FILE, m, cfg.seed if validation_seed is None else validation_seed,
                    out, workers)
