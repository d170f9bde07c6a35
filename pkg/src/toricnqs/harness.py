"""Run configuration, the training loop and run-record persistence.

A run directory holds ``run.jsonl`` (one JSON object per line: a ``config``
header, one ``iteration`` record per SR step, an ``observables`` record at
each measurement and a closing ``final`` record) plus ``checkpoint.bin``.
"""

import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from . import ansatz as nqs
from ._accel import backend
from .ed import configs_to_index, exact_ground_state, renyi2_exact
from .errors import InvalidArgument, NumericalAbort, NumericalDomainError, SRSolveError
from .hamiltonian import ConnectedBatch, FieldParameters, local_energies
from .lattice import build_lattice, central_square_region, string_support
from .observables import Region, bffm, energy_density, invariance_error, renyi2_swap
from .optimizer import SRConfig, estimate_sr_quantities, sr_update
from .sampler import SampleBatch, SamplerConfig, diagnostics, exhaustive_batch, run_chains
from .stats import mean_and_error

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEDULES = ("standard", "two_step")
MODES = ("mc", "exact")
EXACT_MAX_EDGES = 16
MAX_BAD_ITERATIONS = 3


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str = "standard"
    step1_fields: tuple = (0.2, 0.0, 0.0)
    step1_iterations: int = 0
    step2_fields: tuple = (0.2, 0.0, 0.2)
    step2_iterations: int = 0


@dataclass(frozen=True)
class ObservableConfig:
    cadence: int = 50
    bffm: tuple = ()
    renyi: tuple = ()
    invariance: bool = True
    final_samples_factor: int = 4


@dataclass(frozen=True)
class RunConfig:
    L: int = 3
    fields: FieldParameters = FieldParameters(0.2, 0.0, 0.2)
    ansatz: nqs.AnsatzConfig = nqs.AnsatzConfig()
    sampler: SamplerConfig = SamplerConfig()
    sr: SRConfig = SRConfig()
    schedule: ScheduleConfig = ScheduleConfig()
    observables: ObservableConfig = ObservableConfig()
    mode: str = "mc"
    out_dir: str = None
    seed: int = 0
    checkpoint_every: int = 100
    stop_window: int = 0
    ed_reference: bool = False

    def validate(self):
        build_lattice(self.L)
        if self.mode not in MODES:
            raise InvalidArgument(f"sampler mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "exact" and 2 * self.L * self.L - 2 * self.L > EXACT_MAX_EDGES:
            raise InvalidArgument(f"exact enumeration is limited to N <= {EXACT_MAX_EDGES} edges")
        if self.schedule.kind not in SCHEDULES:
            raise InvalidArgument(f"schedule must be one of {SCHEDULES}, got {self.schedule.kind!r}")
        if self.schedule.kind == "two_step" and self.ansatz.kind == "rbm":
            raise InvalidArgument("the two-step schedule needs a Combo or RPP ansatz (block partition)")
        for h in self.all_fields():
            if h.hy != 0.0 and not self.ansatz.complex_params:
                raise InvalidArgument(
                    f"h_y = {h.hy} requires complex parameters (set ansatz.complex_params = true)"
                )
        if self.stop_window < 0 or self.checkpoint_every < 0 or self.observables.cadence < 0:
            raise InvalidArgument("stop_window, checkpoint_every and cadence must be non-negative")
        nqs.get_network(self.ansatz, self.L)
        geom = build_lattice(self.L)
        for perimeter, kind in self.observables.bffm:
            string_support(geom, perimeter, kind)
        for region in self.observables.renyi:
            if isinstance(region, str) and region != "central":
                raise InvalidArgument(f"unknown named region {region!r} (only 'central')")
            edges = central_square_region(geom) if region == "central" else region
            Region(tuple(int(e) for e in edges)).validate(geom)
        return self

    def all_fields(self):
        if self.schedule.kind == "two_step":
            return [FieldParameters.coerce(self.schedule.step1_fields), FieldParameters.coerce(self.schedule.step2_fields)]
        return [self.fields]

    def phases(self):
        """``[(name, fields, iterations, frozen block or None)]``."""
        if self.schedule.kind == "two_step":
            s = self.schedule
            return [
                ("step1", FieldParameters.coerce(s.step1_fields), s.step1_iterations, "NIB"),
                ("step2", FieldParameters.coerce(s.step2_fields), s.step2_iterations, "IB"),
            ]
        return [("train", self.fields, self.sr.max_iterations, None)]

    def to_dict(self):
        d = {
            "lattice": {"L": self.L},
            "fields": dict(zip(("hx", "hy", "hz"), self.fields.as_tuple())),
            "ansatz": self.ansatz.to_dict(),
            "sampler": {**asdict(self.sampler), "mode": self.mode},
            "optimizer": {**asdict(self.sr), "stop_window": self.stop_window},
            "schedule": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.schedule).items()},
            "observables": {
                "cadence": self.observables.cadence,
                "bffm": [{"perimeter": p, "kind": k} for p, k in self.observables.bffm],
                "renyi": [r if isinstance(r, str) else list(r) for r in self.observables.renyi],
                "invariance": self.observables.invariance,
                "final_samples_factor": self.observables.final_samples_factor,
            },
            "output": {"dir": self.out_dir, "checkpoint_every": self.checkpoint_every},
            "run": {"seed": self.seed, "ed_reference": self.ed_reference},
        }
        return d


def _section(d, name, allowed):
    sec = d.get(name, {})
    if not isinstance(sec, dict):
        raise InvalidArgument(f"[{name}] must be a table")
    unknown = set(sec) - set(allowed)
    if unknown:
        raise InvalidArgument(f"unknown keys in [{name}]: {sorted(unknown)}")
    return sec


def config_from_dict(d, seed=None, out_dir=None):
    known = {"lattice", "fields", "ansatz", "sampler", "optimizer", "schedule", "observables", "output", "run", "sweep"}
    unknown = set(d) - known
    if unknown:
        raise InvalidArgument(f"unknown config sections: {sorted(unknown)}")
    lat = _section(d, "lattice", {"L"})
    fld = _section(d, "fields", {"hx", "hy", "hz"})
    ans = _section(d, "ansatz", nqs.AnsatzConfig.__dataclass_fields__)
    smp = _section(d, "sampler", set(SamplerConfig.__dataclass_fields__) | {"mode"})
    opt = _section(d, "optimizer", set(SRConfig.__dataclass_fields__) | {"stop_window"})
    sch = _section(d, "schedule", ScheduleConfig.__dataclass_fields__)
    obs = _section(d, "observables", ObservableConfig.__dataclass_fields__)
    out = _section(d, "output", {"dir", "checkpoint_every"})
    run = _section(d, "run", {"seed", "ed_reference"})
    try:
        master = int(seed if seed is not None else run.get("seed", 0))
        ansatz_cfg = nqs.AnsatzConfig(**{"seed": master, **ans})
        smp = dict(smp)
        mode = smp.pop("mode", "mc")
        sampler_cfg = SamplerConfig(**{"seed": master, **smp})
        opt = dict(opt)
        stop_window = int(opt.pop("stop_window", 0))
        sr_cfg = SRConfig(**opt)
        sch = {k: tuple(v) if isinstance(v, list) else v for k, v in sch.items()}
        schedule = ScheduleConfig(**sch)
        obs = dict(obs)
        obs["bffm"] = tuple((int(b["perimeter"]), str(b.get("kind", "primal"))) for b in obs.get("bffm", ()))
        obs["renyi"] = tuple(r if isinstance(r, str) else tuple(r) for r in obs.get("renyi", ()))
        observables = ObservableConfig(**obs)
        cfg = RunConfig(
            L=int(lat.get("L", 3)),
            fields=FieldParameters(float(fld.get("hx", 0.0)), float(fld.get("hy", 0.0)), float(fld.get("hz", 0.0))),
            ansatz=ansatz_cfg,
            sampler=sampler_cfg,
            sr=sr_cfg,
            schedule=schedule,
            observables=observables,
            mode=mode,
            out_dir=out_dir if out_dir is not None else out.get("dir"),
            seed=master,
            checkpoint_every=int(out.get("checkpoint_every", 100)),
            stop_window=stop_window,
            ed_reference=bool(run.get("ed_reference", False)),
        )
    except TypeError as exc:
        raise InvalidArgument(f"malformed config: {exc}") from exc
    return cfg.validate()


def load_config(path, seed=None, out_dir=None):
    try:
        with open(path, "rb") as fh:
            d = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise InvalidArgument(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InvalidArgument(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(d, seed=seed, out_dir=out_dir)


# ------------------------------------------------------------------ training


@dataclass
class RunRecord:
    config: RunConfig
    entries: list = field(default_factory=list)
    measurements: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    params: nqs.AnsatzParameters = None
    final: dict = None
    version: str = __version__
    phase_params: dict = field(default_factory=dict)


class _RunLog:
    def __init__(self, path, append):
        self.path = path
        self.fh = None
        if path is not None:
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            self.fh = open(path, "a" if append else "w")

    def write(self, record):
        if self.fh is not None:
            self.fh.write(json.dumps(record, default=_json_default) + "\n")
            self.fh.flush()

    def close(self):
        if self.fh is not None:
            self.fh.close()


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _cplx(z):
    z = complex(z)
    return [z.real, z.imag]


class Evaluator:
    """Batch construction, local energies and gradients for one geometry."""

    def __init__(self, config, geom):
        self.config = config
        self.geom = geom
        self.exact = config.mode == "exact"
        if self.exact:
            from .ed import all_configurations

            self.all_configs = all_configurations(geom)

    def log_psi(self, params, table=None):
        if table is not None:
            return lambda S: table[configs_to_index(S)]
        return nqs.log_psi_function(params, self.geom)

    def batch(self, params, iteration, n_samples_factor=1):
        """Return ``(batch, log_psi_fn, O)``."""
        if self.exact:
            lp, O = nqs.log_amplitude_and_gradient(params, self.geom, self.all_configs)
            logw = 2.0 * np.real(lp)
            w = np.exp(logw - logw.max())
            w /= w.sum()
            batch = SampleBatch(self.all_configs, lp, np.ones(1), 1, lp.size, 0, w)
            return batch, self.log_psi(params, lp), O
        cfg = self.config.sampler
        if n_samples_factor != 1:
            cfg = replace(cfg, samples_per_chain=cfg.samples_per_chain * n_samples_factor)
        fn = self.log_psi(params)
        batch = run_chains(fn, self.geom, cfg, iteration)
        lp, O = nqs.log_amplitude_and_gradient(params, self.geom, batch.configs)
        batch.log_psi = lp
        return batch, fn, O

    def measure(self, params, iteration, final=False):
        """Requested observables on a fresh batch (larger for the final pass)."""
        obs = self.config.observables
        factor = obs.final_samples_factor if final else 1
        batch, fn, _ = self.batch(params, iteration + 10**9 if final else iteration, factor)
        out = {}
        for perimeter, kind in obs.bffm:
            key = f"bffm_{kind}_{perimeter}"
            try:
                r = bffm(fn, self.geom, perimeter, kind, batch)
                out[key] = {"value": r.value, "stderr": r.stderr,
                            "numerator": r.numerator.real, "denominator": r.denominator.real}
            except ArithmeticError as exc:
                out[key] = {"error": str(exc)}
        for i, region in enumerate(obs.renyi):
            edges = central_square_region(self.geom) if region == "central" else region
            key = f"renyi2_{region}" if isinstance(region, str) else f"renyi2_{i}"
            if self.exact:
                # the full amplitude table is at hand; contract it directly
                v = np.exp(batch.log_psi - np.max(np.real(batch.log_psi)))
                v /= np.linalg.norm(v)
                s2 = renyi2_exact(v, self.geom.n_edges, edges)
                out[key] = {"value": s2, "stderr": 0.0, "swap": float(np.exp(-s2))}
                continue
            other = self.batch(params, iteration + 2 * 10**9, factor)[0]
            try:
                r = renyi2_swap(fn, self.geom, edges, batch, other)
                out[key] = {"value": r.value, "stderr": r.stderr, "swap": r.swap}
            except ArithmeticError as exc:
                out[key] = {"error": str(exc)}
        if obs.invariance:
            e = invariance_error(fn, self.geom, batch)
            out["invariance_error"] = {"value": e.real, "stderr": e.stderr}
        return out


def _freeze_mask(params, block):
    if block is None:
        return None
    return params.coordinate_mask(nqs.partition_mask(params, block))


def _reference_energies(config, geom):
    if not config.ed_reference or geom.n_edges > 24:
        return {}
    return {h: exact_ground_state(geom, h).energy for h in set(config.all_fields())}


def run_training(config, resume=None, max_iters=None, progress=None):
    """Train according to ``config``; returns a ``RunRecord``.

    ``resume`` is a checkpoint path; training continues at the iteration after
    the one stored in its header with identical seed streams. ``max_iters``
    caps the total number of SR iterations (across phases).
    """
    config.validate()
    geom = build_lattice(config.L)
    out = config.out_dir
    log = _RunLog(os.path.join(out, "run.jsonl") if out else None, append=resume is not None)
    ckpt_path = os.path.join(out, "checkpoint.bin") if out else None
    record = RunRecord(config)
    start = 0
    if resume is not None:
        params, header = nqs.load_checkpoint(resume)
        if header.get("config_echo") and header["config_echo"]["ansatz"] != config.ansatz.to_dict():
            raise InvalidArgument("checkpoint ansatz does not match the config")
        start = int(header.get("iteration", -1)) + 1
    else:
        params = nqs.init_params(geom, config.ansatz)
        if config.schedule.kind == "two_step" and config.ansatz.kind == "rpp":
            # step 1 needs an exactly invariant network: start the skip path at zero
            params.values[nqs.partition_mask(params, "NIB")] = 0.0
        log.write({"type": "config", "config": config.to_dict(), "version": __version__,
                   "backend": backend(),
                   "n_params": params.n_params,
                   "rbm_symmetrized": False if config.ansatz.kind == "rbm" else None})
    references = _reference_energies(config, geom)
    evaluator = Evaluator(config, geom)
    gamma = config.sr.learning_rate
    cadence = config.observables.cadence
    total = sum(p[2] for p in config.phases())
    if max_iters is not None:
        total = min(total, int(max_iters))
    bad = 0
    last_good = None
    n = 0
    history = []
    t0 = time.perf_counter()
    stopped = False
    cur_phase, cur_h = config.phases()[0][:2]
    for phase, h, n_phase, frozen in config.phases():
        if n >= total:
            break
        cur_phase, cur_h = phase, h
        conn = ConnectedBatch(geom, h)
        mask = _freeze_mask(params, frozen)
        phase_end = n + n_phase
        while n < min(phase_end, total):
            if n < start:
                n += 1
                continue
            batch, fn, O = evaluator.batch(params, n)
            try:
                eloc = local_energies(geom, h, fn, batch.configs, batch.log_psi, conn)
                E, se, tau = mean_and_error(eloc, batch.n_chains, batch.weights)
                finite = np.isfinite(E) and np.all(np.isfinite(eloc))
            except NumericalDomainError:
                finite = False
            entry = {"type": "iteration", "iteration": n, "phase": phase, "training_time": gamma * n,
                     "fields": list(h.as_tuple())}
            if not finite:
                bad += 1
                entry["error"] = "non-finite energy"
                log.write(entry)
                record.entries.append(entry)
                if bad >= MAX_BAD_ITERATIONS:
                    log.close()
                    raise NumericalAbort(
                        f"non-finite energy for {MAX_BAD_ITERATIONS} consecutive iterations at {n}", last_good
                    )
                n += 1
                continue
            bad = 0
            entry.update({"energy": float(np.real(E)), "energy_imag": float(np.imag(E)), "stderr": se,
                          "density": energy_density(E, geom), "tau": tau,
                          "numerical_events": batch.numerical_events})
            if h in references:
                entry["relative_error"] = abs(float(np.real(E)) - references[h]) / abs(references[h])
            if not evaluator.exact:
                diag = diagnostics(batch, eloc) if batch.samples_per_chain >= 4 and batch.n_chains >= 2 else None
                if diag is not None:
                    entry.update({"tau": diag.tau, "rhat": diag.rhat})
                entry["acceptance"] = batch.mean_acceptance
            q = estimate_sr_quantities(O, eloc, mask, batch.weights)
            try:
                step = sr_update(q, config.sr)
            except SRSolveError as exc:
                log.close()
                raise NumericalAbort(f"SR solve failed at iteration {n}: {exc}", last_good) from exc
            entry.update({"force_norm": step.force_norm, "sv_min": step.sv_min, "sv_max": step.sv_max})
            if cadence and n % cadence == 0:
                entry["observables"] = evaluator.measure(params, n)
            log.write(entry)
            record.entries.append(entry)
            history.append((float(np.real(E)), se))
            if progress is not None:
                progress(entry)
            params = params.with_real_coordinates(params.real_coordinates() + step.delta)
            if ckpt_path and config.checkpoint_every and (n + 1) % config.checkpoint_every == 0:
                _save(ckpt_path, params, config, h, n, phase)
                last_good = ckpt_path
                record.checkpoints.append(ckpt_path)
            n += 1
            if _should_stop(history, config.stop_window):
                stopped = True
                break
        record.phase_params[phase] = params.copy()
        if stopped:
            break
    h_final = cur_h
    final = {"type": "final", "iterations": n, "wall_time": time.perf_counter() - t0, "stopped_early": stopped}
    if n > start or resume is None:
        batch, fn, _ = evaluator.batch(params, n, config.observables.final_samples_factor)
        eloc = local_energies(geom, h_final, fn, batch.configs, batch.log_psi, ConnectedBatch(geom, h_final))
        E, se, tau = mean_and_error(eloc, batch.n_chains, batch.weights)
        if not np.isfinite(E):
            log.close()
            raise NumericalAbort("non-finite energy in the final measurement", last_good)
        final.update({"energy": float(np.real(E)), "stderr": se, "density": energy_density(E, geom), "tau": tau})
        if not evaluator.exact:
            final["acceptance"] = batch.mean_acceptance
        if h_final in references:
            final["ed_energy"] = references[h_final]
            final["relative_error"] = abs(final["energy"] - references[h_final]) / abs(references[h_final])
        final["observables"] = evaluator.measure(params, n, final=True)
    if ckpt_path:
        _save(ckpt_path, params, config, h_final, n - 1, cur_phase)
        record.checkpoints.append(ckpt_path)
    log.write(final)
    log.close()
    record.params = params
    record.final = final
    return record


def _save(path, params, config, h, iteration, phase):
    nqs.save_checkpoint(path, params, h, config.seed,
                        {"iteration": int(iteration), "phase": phase, "config_echo": config.to_dict()})


def _should_stop(history, window):
    """Stop once the energy gained over the last window is below its standard error."""
    if window <= 0 or len(history) < 2 * window:
        return False
    prev = np.mean([e for e, _ in history[-2 * window : -window]])
    last = np.array(history[-window:])
    improvement = prev - last[:, 0].mean()
    return improvement < last[:, 1].mean()


def read_run_log(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def exact_observables(config, h=None):
    """ED energy and requested observables for the config's geometry and field."""
    from .ed import exact_expectation
    from .observables import BFFMSpec, Region

    geom = build_lattice(config.L)
    h = FieldParameters.coerce(h if h is not None else config.fields)
    cache = os.path.join(config.out_dir, "ed_cache") if config.out_dir else None
    st = exact_ground_state(geom, h, cache_dir=cache)
    out = {"L": config.L, "fields": list(h.as_tuple()), "energy": st.energy,
           "density": energy_density(st.energy, geom), "residual": st.residual, "method": st.method}
    for perimeter, kind in config.observables.bffm:
        out[f"bffm_{kind}_{perimeter}"] = float(exact_expectation(st, BFFMSpec(perimeter, kind)))
    for i, region in enumerate(config.observables.renyi):
        edges = central_square_region(geom) if region == "central" else region
        key = f"renyi2_{region}" if isinstance(region, str) else f"renyi2_{i}"
        out[key] = float(exact_expectation(st, Region(tuple(edges))))
    return out


def exhaustive_log_psi_batch(params, geom):
    """Exhaustive batch for trained parameters (helper for small-lattice checks)."""
    return exhaustive_batch(nqs.log_psi_function(params, geom), geom)
