"""End-to-end campaign orchestration: design, simulate, reduce, train,
evaluate, report, with hash-addressed reproducible persistence.

A run directory (under the artifact root, see ``VPROM_ARTIFACT_ROOT``) is
keyed by the hash of its canonical configuration; every command is idempotent
and resumable at the sample level.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__ as tool_version
from . import cprom as cprom_mod
from . import cvae as cvae_mod
from . import ecsw as ecsw_mod
from . import macprom as mac_mod
from .containers import Manifest, load_array, read_json, save_array, sha256_text, write_json
from .frame import ExcitationSpec, FrameConfig, IntegrationError, generate_excitation
from .metrics import ErrorRecord, default_time_set, emit_error_map, err_q, summarize
from .reduction import (
    ReductionBasis,
    RomSolution,
    assemble_snapshots,
    compute_coefficients,
    pod_basis,
    rom_simulate,
)
from .sampling import ParameterDomain, lhs_sample, make_sample, samples_to_matrix
from .simulate import build_link_arrays, resolve_parameters, simulate_fom

ARTIFACT_ROOT_ENV = "VPROM_ARTIFACT_ROOT"
STRATEGIES = ("mac", "cprom", "vprom")
STRATEGY_LABELS = {"mac": "MACpROM", "cprom": "CpROM", "vprom": "VpROM"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# presets and configuration
# ---------------------------------------------------------------------------


def desk_preset() -> dict:
    """Desk-scale campaign: finishes in minutes on a laptop."""
    n_stories = 32
    return {
        "preset": "desk",
        "frame": {
            "n_stories": n_stories,
            "dofs_per_story": 2,
            "story_masses": 1111.0,
            "direction_scales": [1.0, 0.7],
            "excitation_direction": [0.7071067811865476, 0.7071067811865476],
            "rayleigh_damping": [0.7522388059701493, 0.00044776119402985075],
            "link_stiffness_scales": np.linspace(3.0, 1.0, n_stories).tolist(),
            "boucwen_base": {
                "alpha": 0.4,
                "k": 1.0e8,
                "A": 1.0,
                "beta": 15.0,
                "gamma": 5.0,
                "w": 1.0,
                "delta_nu": 0.0,
                "delta_eta": 0.5,
            },
        },
        "excitation": {
            "amp": 2.25e6,
            "f_but": 10.0,
            "noise_seed": 2024,
            "dt": 0.0025,
            "duration": 3.0,
        },
        "domain": {
            "names": ["alpha", "k", "amp", "f_but", "E", "delta_eta"],
            "lower": [0.25, 0.8e8, 1.5e6, 5.0, 185.0e9, 0.25],
            "upper": [0.50, 1.2e8, 3.0e6, 15.0, 235.0e9, 0.75],
        },
        "doe": {"n_train": 20, "n_valid": 50, "seed_train": 101, "seed_valid": 202},
        "reduction": {"r": 8, "r_global": 12},
        "mac": {"tolerance": 0.25, "max_clusters": 5, "knn": 3},
        "cprom": {"k_int": 4, "idw_power": 2.0},
        "vprom": {
            "latent_dim": 4,
            "hidden": [16],
            "epochs": 4000,
            "batch_size": 16,
            "learning_rate": 5.0e-3,
            "seed": 707,
            "n_latent_samples": 1,
        },
        "ecsw": {"tau": 0.01, "stride": 5},
        "solver": {"rel_tol": 1.0e-8, "max_iter": 30, "max_halvings": 4},
        "metrics": {"transient_skip": 0.01},
    }


def paper_preset() -> dict:
    """Experiment-scale campaign mirroring the published study layout."""
    cfg = desk_preset()
    n_stories = 100
    cfg["preset"] = "paper"
    cfg["frame"]["n_stories"] = n_stories
    cfg["frame"]["link_stiffness_scales"] = np.linspace(3.0, 1.0, n_stories).tolist()
    cfg["doe"] = {"n_train": 50, "n_valid": 500, "seed_train": 101, "seed_valid": 202}
    cfg["reduction"] = {"r": 16, "r_global": 200}
    cfg["mac"]["max_clusters"] = 8
    return cfg


PRESETS = {"desk": desk_preset, "paper": paper_preset}


def _deep_update(base: dict, override: dict) -> dict:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> dict:
    """Assemble the run configuration: preset defaults, then the YAML file,
    then programmatic overrides."""
    doc = {}
    if path is not None:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    name = preset or doc.get("preset") or "paper"
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (have: {sorted(PRESETS)})")
    cfg = PRESETS[name]()
    _deep_update(cfg, doc)
    if overrides:
        _deep_update(cfg, overrides)
    cfg["preset"] = name
    validate_config(cfg)
    return cfg


def require(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing configuration key '{dotted}'")
        node = node[part]
    return node


def validate_config(cfg: dict) -> None:
    for key in (
        "frame.n_stories",
        "excitation.dt",
        "excitation.duration",
        "excitation.noise_seed",
        "domain.names",
        "domain.lower",
        "domain.upper",
        "doe.n_train",
        "doe.n_valid",
        "doe.seed_train",
        "doe.seed_valid",
        "reduction.r",
        "reduction.r_global",
    ):
        require(cfg, key)
    if len(cfg["domain"]["lower"]) != len(cfg["domain"]["names"]):
        raise ConfigError("missing configuration key 'domain.lower' entries for every name")
    frame_config(cfg)
    excitation_spec(cfg).validate()


def frame_config(cfg: dict) -> FrameConfig:
    return FrameConfig.from_dict(cfg["frame"])


def excitation_spec(cfg: dict) -> ExcitationSpec:
    return ExcitationSpec.from_dict(cfg["excitation"])


def domain_of(cfg: dict) -> ParameterDomain:
    return ParameterDomain.from_dict(cfg["domain"])


def canonical_config_text(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def run_id_of(cfg: dict) -> str:
    return sha256_text(canonical_config_text(cfg))[:12]


def artifact_root(explicit=None) -> Path:
    root = explicit or os.environ.get(ARTIFACT_ROOT_ENV) or "./vprom_artifacts"
    return Path(root)


class Run:
    """Paths, manifest and cached artifacts of one campaign directory."""

    def __init__(self, cfg: dict, root=None):
        self.cfg = cfg
        self.run_id = run_id_of(cfg)
        self.dir = artifact_root(root) / self.run_id
        self.dir.mkdir(parents=True, exist_ok=True)
        cfg_path = self.dir / "config.yaml"
        if not cfg_path.exists():
            with open(cfg_path, "w") as fh:
                yaml.safe_dump(cfg, fh, sort_keys=True)
        self.manifest = Manifest(self.dir / "manifest.json")
        if "run_id" not in self.manifest:
            self.manifest.record("run_id", self.run_id)
        if "meta" not in self.manifest:
            self.manifest.record(
                "meta",
                {
                    "tool_version": tool_version,
                    "config_hash": sha256_text(canonical_config_text(cfg)),
                    "preset": cfg.get("preset"),
                    "strategy_roster": ["FOM"]
                    + [STRATEGY_LABELS[s] for s in STRATEGIES]
                    + [f"HP-{STRATEGY_LABELS[s]}" for s in STRATEGIES],
                    "seeds": {
                        "doe_train": cfg["doe"]["seed_train"],
                        "doe_valid": cfg["doe"]["seed_valid"],
                        "excitation": cfg["excitation"]["noise_seed"],
                        "vae_master": cfg["vprom"]["seed"],
                    },
                },
            )

    def path(self, *parts) -> Path:
        p = self.dir.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p


# ---------------------------------------------------------------------------
# doe
# ---------------------------------------------------------------------------


def cmd_doe(run: Run) -> dict:
    cfg = run.cfg
    dom = domain_of(cfg)
    out = {}
    for split, n_key, seed_key in (
        ("train", "n_train", "seed_train"),
        ("valid", "n_valid", "seed_valid"),
    ):
        n = int(require(cfg, f"doe.{n_key}"))
        seed = int(require(cfg, f"doe.{seed_key}"))
        path = run.path("doe", f"{split}.vprm")
        key = f"doe/{split}"
        if key in run.manifest and path.exists():
            out[split] = load_array(path)
            continue
        samples = lhs_sample(dom, n, seed)
        values = samples_to_matrix(samples)
        save_array(path, values)
        run.manifest.record(
            key, {"n": n, "seed": seed, "names": list(dom.names), "file": str(path.name)}
        )
        out[split] = values
    return out


def load_samples(run: Run, split: str):
    dom = domain_of(run.cfg)
    values = load_array(run.path("doe", f"{split}.vprm"))
    return [make_sample(dom, row) for row in values]


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _simulate_one(payload):
    cfg, split, index, values = payload
    dom = domain_of(cfg)
    sample = make_sample(dom, np.asarray(values))
    config = frame_config(cfg)
    spec = excitation_spec(cfg)
    solver = cfg.get("solver", {})
    sol = simulate_fom(
        config,
        sample,
        spec,
        rel_tol=solver.get("rel_tol", 1.0e-8),
        max_iter=solver.get("max_iter", 30),
        max_halvings=solver.get("max_halvings", 4),
    )
    return index, sol


def fom_dir(run: Run, split: str, index: int) -> Path:
    return run.dir / "fom" / split / f"sample_{index:04d}"


def save_fom(run: Run, split: str, index: int, sol) -> None:
    d = fom_dir(run, split, index)
    d.mkdir(parents=True, exist_ok=True)
    save_array(d / "u.vprm", sol.u)
    save_array(d / "v.vprm", sol.u_dot)
    save_array(d / "a.vprm", sol.u_ddot)
    save_array(d / "z.vprm", sol.link_states.z)
    save_array(d / "eps.vprm", sol.link_states.eps_energy)
    write_json(
        d / "meta.json",
        {
            "wall_time": sol.wall_time,
            "newton_iterations": sol.newton_iterations,
            "n_steps": sol.n_steps,
            "n_dofs": sol.n_dofs,
        },
    )


def load_fom(run: Run, split: str, index: int):
    from .frame import BoucWenTrace, FomSolution

    d = fom_dir(run, split, index)
    meta = read_json(d / "meta.json")
    spec = excitation_spec(run.cfg)
    u = load_array(d / "u.vprm")
    return FomSolution(
        times=spec.times(),
        u=u,
        u_dot=load_array(d / "v.vprm"),
        u_ddot=load_array(d / "a.vprm"),
        link_states=BoucWenTrace(z=load_array(d / "z.vprm"), eps_energy=load_array(d / "eps.vprm")),
        wall_time=meta["wall_time"],
        newton_iterations=meta["newton_iterations"],
    )


def fom_complete(run: Run, split: str, index: int) -> bool:
    d = fom_dir(run, split, index)
    return (d / "meta.json").exists() and (d / "u.vprm").exists()


def cmd_simulate(run: Run, split: str, workers: int = 1, log=print) -> dict:
    values = load_array(run.path("doe", f"{split}.vprm"))
    pending = [
        (run.cfg, split, i, values[i].tolist())
        for i in range(values.shape[0])
        if not fom_complete(run, split, i)
    ]
    failures = {}
    if pending:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for index, sol in pool.map(_simulate_one, pending):
                    save_fom(run, split, index, sol)
        else:
            for payload in pending:
                index = payload[2]
                try:
                    _, sol = _simulate_one(payload)
                except IntegrationError as exc:
                    failures[index] = str(exc)
                    log(f"[simulate] sample {index} failed: {exc}")
                    continue
                save_fom(run, split, index, sol)
    done = sum(1 for i in range(values.shape[0]) if fom_complete(run, split, i))
    status = {"split": split, "total": int(values.shape[0]), "done": done, "failures": failures}
    if done == values.shape[0]:
        key = f"fom/{split}/complete"
        if key not in run.manifest:
            run.manifest.record(key, {"snapshot_ready": True, "count": done})
    return status


# ---------------------------------------------------------------------------
# shared reduction artifacts
# ---------------------------------------------------------------------------


def build_bases(run: Run, log=print):
    """Local POD basis per training sample plus the global basis; cached."""
    cfg = run.cfg
    r = int(cfg["reduction"]["r"])
    r_global = int(cfg["reduction"]["r_global"])
    samples = load_samples(run, "train")
    local_paths = [run.path("bases", f"local_{i:04d}.vprm") for i in range(len(samples))]
    global_path = run.path("bases", "global.vprm")
    if all(p.exists() for p in local_paths) and global_path.exists():
        locals_ = [
            ReductionBasis(
                modes=load_array(p), singular_values=np.zeros(r), energy_fraction=float("nan"),
                provenance=f"local:{i}",
            )
            for i, p in enumerate(local_paths)
        ]
        g = ReductionBasis(
            modes=load_array(global_path),
            singular_values=load_array(run.path("bases", "global_sv.vprm")),
            energy_fraction=float(read_json(run.path("bases", "bases.json"))["global_energy"]),
            provenance="global",
        )
        return samples, locals_, g
    solutions = [load_fom(run, "train", i) for i in range(len(samples))]
    locals_ = []
    for i, sol in enumerate(solutions):
        basis = pod_basis(assemble_snapshots([sol]), r=r, provenance=f"local:{i}")
        save_array(local_paths[i], basis.modes)
        locals_.append(basis)
    snaps = assemble_snapshots(solutions)
    g = pod_basis(snaps, r=r_global, provenance="global")
    save_array(global_path, g.modes)
    save_array(run.path("bases", "global_sv.vprm"), g.singular_values)
    write_json(
        run.path("bases", "bases.json"),
        {"r": r, "r_global": int(g.r), "global_energy": g.energy_fraction},
    )
    log(f"[build] {len(locals_)} local bases (r={r}) + global basis (r_global={g.r})")
    return samples, locals_, g


# ---------------------------------------------------------------------------
# strategy builds
# ---------------------------------------------------------------------------


def cmd_build(run: Run, strategy: str, log=print):
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy '{strategy}' (have {STRATEGIES})")
    samples, locals_, g = build_bases(run, log=log)
    cfg = run.cfg
    if strategy == "mac":
        lib = mac_mod.adaptive_cluster(
            list(zip(samples, locals_)),
            mac_tolerance=float(cfg["mac"]["tolerance"]),
            max_clusters=int(cfg["mac"]["max_clusters"]),
        )
        for c, basis in enumerate(lib.center_bases):
            save_array(run.path("strategies", "mac", f"center_{c:02d}.vprm"), basis.modes)
        write_json(
            run.path("strategies", "mac", "library.json"),
            {
                "center_indices": [int(i) for i in lib.center_indices],
                "assignments": [int(a) for a in lib.assignments],
                "similarities": [float(s) for s in lib.similarities],
                "mac_tolerance": lib.mac_tolerance,
                "max_clusters": lib.max_clusters,
                "n_clusters": lib.n_clusters,
            },
        )
        log(f"[build mac] {lib.n_clusters} clusters for {len(samples)} samples")
        return lib
    if strategy == "cprom":
        coeff_set = cprom_mod.align_coefficient_set(
            [(samples[i], compute_coefficients(locals_[i], g, sample=samples[i]))
             for i in range(len(locals_))]
        )
        for i, (_, coeff) in enumerate(coeff_set):
            save_array(run.path("strategies", "cprom", f"coeff_{i:04d}.vprm"), coeff.X)
        write_json(
            run.path("strategies", "cprom", "coeffs.json"),
            {"count": len(locals_), "r_global": int(g.r), "r": int(locals_[0].r)},
        )
        log(f"[build cprom] {len(locals_)} coefficient matrices ({g.r}x{locals_[0].r})")
        return True
    # vprom
    coeff_set = cprom_mod.align_coefficient_set(
        [(samples[i], compute_coefficients(locals_[i], g, sample=samples[i]))
         for i in range(len(samples))]
    )
    vcfg = cfg["vprom"]
    tc = cvae_mod.TrainConfig(
        epochs=int(vcfg["epochs"]),
        batch_size=int(vcfg["batch_size"]),
        learning_rate=float(vcfg["learning_rate"]),
        seed=int(vcfg["seed"]),
        n_latent_samples=int(vcfg["n_latent_samples"]),
        hidden=tuple(int(h) for h in vcfg["hidden"]),
        latent_dim=int(vcfg["latent_dim"]),
    )
    models = cvae_mod.train_column_models(coeff_set, tc)
    save_cvae_models(run, models)
    log(f"[build vprom] trained {len(models)} column models "
        f"(final losses: {[round(m.loss_trace[-1], 5) for m in models]})")
    return models


def save_cvae_models(run: Run, models):
    meta = {"columns": []}
    for m in models:
        col = {
            "column_index": m.column_index,
            "latent_dim": m.latent_dim,
            "data_dim": m.data_dim,
            "cond_dim": m.cond_dim,
            "normalization": m.normalization,
            "loss_trace_first": m.loss_trace[0] if m.loss_trace else None,
            "loss_trace_last": m.loss_trace[-1] if m.loss_trace else None,
            "encoder": [],
            "decoder": [],
        }
        for net_name in ("encoder", "decoder"):
            net = getattr(m, net_name)
            for li, layer in enumerate(net.layers):
                stem = f"col{m.column_index:02d}_{net_name}_{li}"
                save_array(run.path("strategies", "vprom", f"{stem}_W.vprm"), layer.weights)
                save_array(run.path("strategies", "vprom", f"{stem}_b.vprm"), layer.bias)
                col[net_name].append({"activation": layer.activation, "stem": stem})
        meta["columns"].append(col)
    write_json(run.path("strategies", "vprom", "model.json"), meta)


def load_cvae_models(run: Run):
    meta = read_json(run.path("strategies", "vprom", "model.json"))
    models = []
    for col in meta["columns"]:
        nets = {}
        for net_name in ("encoder", "decoder"):
            layers = []
            for entry in col[net_name]:
                W = load_array(run.path("strategies", "vprom", f"{entry['stem']}_W.vprm"))
                b = load_array(run.path("strategies", "vprom", f"{entry['stem']}_b.vprm"))
                layers.append(
                    cvae_mod.DenseLayer(weights=W, bias=b, activation=entry["activation"])
                )
            nets[net_name] = cvae_mod.Network(layers)
        m = cvae_mod.CvaeModel(
            encoder=nets["encoder"],
            decoder=nets["decoder"],
            latent_dim=int(col["latent_dim"]),
            column_index=int(col["column_index"]),
            data_dim=int(col["data_dim"]),
            cond_dim=int(col["cond_dim"]),
            normalization=col["normalization"],
            trained=True,
        )
        models.append(m)
    return models


def load_cluster_library(run: Run, samples, locals_):
    doc = read_json(run.path("strategies", "mac", "library.json"))
    centers = [
        ReductionBasis(
            modes=load_array(run.path("strategies", "mac", f"center_{c:02d}.vprm")),
            singular_values=np.zeros(1),
            energy_fraction=float("nan"),
            provenance=f"mac:cluster={c}",
        )
        for c in range(int(doc["n_clusters"]))
    ]
    norm = np.stack([np.asarray(s.normalized) for s in samples])
    return mac_mod.ClusterLibrary(
        center_indices=[int(i) for i in doc["center_indices"]],
        center_samples=[samples[i] for i in doc["center_indices"]],
        center_bases=centers,
        assignments=np.asarray(doc["assignments"], dtype=np.int64),
        similarities=np.asarray(doc["similarities"], dtype=float),
        mac_tolerance=float(doc["mac_tolerance"]),
        max_clusters=int(doc["max_clusters"]),
        training_normalized=norm,
        training_cluster=np.asarray(doc["assignments"], dtype=np.int64),
    )


def load_cprom_coeffs(run: Run, samples):
    from .reduction import CoefficientMatrix

    doc = read_json(run.path("strategies", "cprom", "coeffs.json"))
    out = []
    for i in range(int(doc["count"])):
        X = load_array(run.path("strategies", "cprom", f"coeff_{i:04d}.vprm"))
        out.append((samples[i], CoefficientMatrix(X=X, sample=samples[i])))
    return out


# ---------------------------------------------------------------------------
# basis production per query
# ---------------------------------------------------------------------------


class StrategyContext:
    """Loaded artifacts needed to produce a basis at any query parameter."""

    def __init__(self, run: Run, strategy: str):
        self.run = run
        self.strategy = strategy
        self.cfg = run.cfg
        self.samples, self.locals_, self.global_basis = build_bases(run, log=lambda *_: None)
        if strategy == "mac":
            self.library = load_cluster_library(run, self.samples, self.locals_)
        elif strategy == "cprom":
            self.training = load_cprom_coeffs(run, self.samples)
        elif strategy == "vprom":
            self.models = load_cvae_models(run)
        else:
            raise ConfigError(f"unknown strategy '{strategy}'")

    def basis_for(self, sample) -> ReductionBasis:
        if self.strategy == "mac":
            c = mac_mod.select_cluster(self.library, sample, k=int(self.cfg["mac"]["knn"]))
            basis = self.library.basis_for(c)
            return ReductionBasis(
                modes=basis.modes,
                singular_values=basis.singular_values,
                energy_fraction=basis.energy_fraction,
                provenance=f"mac:cluster={c}",
            )
        if self.strategy == "cprom":
            return cprom_mod.interpolate_basis(
                self.training,
                self.global_basis,
                sample,
                k_int=int(self.cfg["cprom"]["k_int"]),
                idw_power=float(self.cfg["cprom"]["idw_power"]),
            )
        return cvae_mod.generate_basis(self.models, self.global_basis, sample, mode="mean")


# ---------------------------------------------------------------------------
# ECSW weights per strategy context
# ---------------------------------------------------------------------------


def ecsw_weights_path(run: Run, strategy: str, tau: float) -> Path:
    return run.path("ecsw", f"{strategy}_tau{tau:g}.json")


def build_ecsw_weights(run: Run, ctx: StrategyContext, tau: float, stride: int, log=print):
    """Weights per local-basis context: per cluster for the MAC strategy, one
    set over training replays for cprom/vprom."""
    path = ecsw_weights_path(run, ctx.strategy, tau)
    if path.exists():
        return load_ecsw_weights(run, ctx.strategy, tau)
    cfg = run.cfg
    config = frame_config(cfg)
    spec = excitation_spec(cfg)
    bw, k_scale, _ = resolve_parameters(ctx.samples[0], config, spec)
    links = build_link_arrays(config, bw, k_scale)

    def replay(sample, basis) -> RomSolution:
        return rom_simulate(config, sample, spec, basis)

    out: dict[str, ecsw_mod.EcswWeights] = {}
    if ctx.strategy == "mac":
        lib = ctx.library
        for c in range(lib.n_clusters):
            members = [i for i, a in enumerate(lib.assignments) if a == c]
            sols = [replay(ctx.samples[i], lib.basis_for(c)) for i in members]
            system = ecsw_mod.build_ecsw_system(sols, lib.basis_for(c), links, stride=stride)
            out[str(c)] = ecsw_mod.sparse_nnls(system.G, system.b, tau)
            log(f"[ecsw mac] cluster {c}: {out[str(c)].n_selected}/{links.n_elements} elements")
    else:
        sols, bases = [], []
        for sample in ctx.samples:
            basis = ctx.basis_for(sample)
            sols.append(replay(sample, basis))
            bases.append(basis)
        system = ecsw_mod.build_ecsw_system(sols, bases, links, stride=stride)
        out["global"] = ecsw_mod.sparse_nnls(system.G, system.b, tau)
        log(
            f"[ecsw {ctx.strategy}] {out['global'].n_selected}/{links.n_elements} elements, "
            f"residual {out['global'].residual:.2e}"
        )
    payload = {}
    for key, w in out.items():
        payload[key] = {
            "indices": [int(i) for i in w.selected],
            "values": [float(w.xi[i]) for i in w.selected],
            "tau": w.tau,
            "residual": w.residual,
            "n_elements": int(links.n_elements),
        }
    write_json(path, payload)
    return out


def load_ecsw_weights(run: Run, strategy: str, tau: float):
    payload = read_json(ecsw_weights_path(run, strategy, tau))
    out = {}
    for key, doc in payload.items():
        xi = np.zeros(int(doc["n_elements"]))
        xi[np.asarray(doc["indices"], dtype=int)] = np.asarray(doc["values"], dtype=float)
        out[key] = ecsw_mod.EcswWeights(
            xi=xi,
            selected=np.asarray(doc["indices"], dtype=int),
            tau=float(doc["tau"]),
            residual=float(doc["residual"]),
        )
    return out


def _weights_for_query(ctx: StrategyContext, weights_map, sample):
    if ctx.strategy == "mac":
        c = mac_mod.select_cluster(ctx.library, sample, k=int(ctx.cfg["mac"]["knn"]))
        return weights_map[str(c)]
    return weights_map["global"]


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def cmd_evaluate(
    run: Run,
    strategy: str,
    split: str = "valid",
    hyper: bool = False,
    tau: float | None = None,
    uq_draws: int = 0,
    uq_sample: int = 0,
    max_samples: int | None = None,
    log=print,
):
    """Per-sample basis production, ROM run, and error records against the
    stored FOM references."""
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy '{strategy}'")
    if uq_draws and strategy != "vprom":
        raise ConfigError("--uq is only valid for strategy 'vprom'")
    cfg = run.cfg
    ctx = StrategyContext(run, strategy)
    config = frame_config(cfg)
    spec = excitation_spec(cfg)
    solver = cfg.get("solver", {})
    tau = float(tau if tau is not None else cfg["ecsw"]["tau"])
    weights_map = (
        build_ecsw_weights(run, ctx, tau, int(cfg["ecsw"]["stride"]), log=log) if hyper else None
    )

    samples = load_samples(run, split)
    if max_samples is not None:
        samples = samples[:max_samples]
    skip = float(cfg["metrics"]["transient_skip"])
    records = []
    failures = []
    for i, sample in enumerate(samples):
        if not fom_complete(run, split, i):
            failures.append({"index": i, "error": "missing FOM reference"})
            continue
        ref = load_fom(run, split, i)
        try:
            basis = ctx.basis_for(sample)
            w = _weights_for_query(ctx, weights_map, sample) if hyper else None
            rsol = rom_simulate(
                config,
                sample,
                spec,
                basis,
                hyper_weights=w.xi if w is not None else None,
                rel_tol=solver.get("rel_tol", 1.0e-8),
                max_iter=solver.get("max_iter", 30),
                max_halvings=solver.get("max_halvings", 4),
            )
        except IntegrationError as exc:
            failures.append({"index": i, "error": str(exc)})
            log(f"[evaluate {strategy}] sample {i} failed: {exc}")
            continue
        tset = default_time_set(ref.n_steps, skip)
        rec = ErrorRecord(
            sample_index=i,
            strategy=("HP-" if hyper else "") + STRATEGY_LABELS[strategy],
            err_u=err_q(ref.u, rsol.u, time_set=tset),
            err_udot=err_q(ref.u_dot, rsol.u_dot, time_set=tset),
            err_uddot=err_q(ref.u_ddot, rsol.u_ddot, time_set=tset),
            wall_time_fom=ref.wall_time,
            wall_time_rom=rsol.wall_time,
            parameters=sample.as_dict(),
            extra={"basis": rsol.basis_provenance},
        )
        records.append(rec)

    tag = f"{strategy}_{split}" + ("_hp" if hyper else "")
    save_records(run, tag, records, failures)
    log(f"[evaluate] {tag}: {len(records)} records, {len(failures)} failures")

    if uq_draws:
        _emit_uq_envelope(run, ctx, samples[uq_sample], uq_sample, uq_draws, split, log=log)
    return records


def _emit_uq_envelope(run: Run, ctx: StrategyContext, sample, index, n_draws, split, log=print):
    cfg = run.cfg
    rom_ctx = cvae_mod.RomContext(
        config=frame_config(cfg), sample=sample, spec=excitation_spec(cfg)
    )
    dist, env = cvae_mod.uncertainty_envelope(
        ctx.models,
        ctx.global_basis,
        sample,
        rom_ctx,
        n_draws=n_draws,
        seed=int(cfg["vprom"]["seed"]) + 7919,
    )
    base = run.path("records", f"uq_{split}_{index:04d}")
    save_array(str(base) + "_lower.vprm", env.lower)
    save_array(str(base) + "_upper.vprm", env.upper)
    save_array(str(base) + "_mean.vprm", env.mean_trajectory)
    dof = int(np.argmax(np.abs(env.mean_trajectory).max(axis=0)))
    with open(str(base) + ".csv", "w") as fh:
        fh.write("time,lower,upper,mean\n")
        for t in range(env.times.shape[0]):
            fh.write(
                f"{env.times[t]:.10g},{env.lower[t, dof]:.17g},"
                f"{env.upper[t, dof]:.17g},{env.mean_trajectory[t, dof]:.17g}\n"
            )
    write_json(
        str(base) + ".json",
        {
            "n_draws": n_draws,
            "n_success": env.n_success,
            "n_failed": env.n_failed,
            "containment_fraction": env.containment_fraction(),
            "monitored_dof": dof,
            "draw_seeds": dist.draw_seeds,
        },
    )
    log(
        f"[uq] sample {index}: {env.n_success}/{n_draws} draws, "
        f"containment {env.containment_fraction():.4f}"
    )
    return env


def save_records(run: Run, tag: str, records, failures):
    payload = {
        "records": [
            {
                "sample_index": r.sample_index,
                "strategy": r.strategy,
                "err_u": r.err_u,
                "err_udot": r.err_udot,
                "err_uddot": r.err_uddot,
                "wall_time_fom": r.wall_time_fom,
                "wall_time_rom": r.wall_time_rom,
                "parameters": r.parameters,
                "extra": r.extra,
            }
            for r in records
        ],
        "failures": failures,
    }
    write_json(run.path("records", f"{tag}.json"), payload)
    with open(run.path("records", f"{tag}.csv"), "w") as fh:
        fh.write("sample_index,strategy,err_u,err_udot,err_uddot\n")
        for r in records:
            fh.write(
                f"{r.sample_index},{r.strategy},{r.err_u:.17g},{r.err_udot:.17g},{r.err_uddot:.17g}\n"
            )


def load_records(run: Run, tag: str):
    payload = read_json(run.path("records", f"{tag}.json"))
    records = [
        ErrorRecord(
            sample_index=doc["sample_index"],
            strategy=doc["strategy"],
            err_u=doc["err_u"],
            err_udot=doc["err_udot"],
            err_uddot=doc["err_uddot"],
            wall_time_fom=doc["wall_time_fom"],
            wall_time_rom=doc["wall_time_rom"],
            parameters=doc["parameters"],
            extra=doc.get("extra", {}),
        )
        for doc in payload["records"]
    ]
    return records, payload["failures"]


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(run: Run, log=print):
    """Aggregate all error records into the summary tables and plot data."""
    records = []
    rec_dir = run.dir / "records"
    if rec_dir.exists():
        for path in sorted(rec_dir.glob("*_*.json")):
            if path.name.startswith("uq_"):
                continue
            recs, _ = load_records(run, path.stem)
            records.extend(recs)
    if not records:
        raise ConfigError("no evaluation records found; run 'evaluate' first")
    summaries = summarize(records)

    err_path = run.path("report", "summary_errors.csv")
    with open(err_path, "w") as fh:
        fh.write("strategy,n,median_err_u,max_err_u,q1_err_u,q3_err_u,median_err_uddot,max_err_uddot\n")
        for s in summaries.values():
            fh.write(
                f"{s.strategy},{s.n_records},{s.median_err_u:.17g},{s.max_err_u:.17g},"
                f"{s.q1_err_u:.17g},{s.q3_err_u:.17g},{s.median_err_uddot:.17g},{s.max_err_uddot:.17g}\n"
            )
    timing_path = run.path("report", "summary_timing.csv")
    with open(timing_path, "w") as fh:
        fh.write("strategy,mean_speed_up,mean_wall_fom,mean_wall_rom\n")
        for s in summaries.values():
            fh.write(f"{s.strategy},{s.mean_speed_up:.6g},{s.mean_wall_fom:.6g},{s.mean_wall_rom:.6g}\n")

    scatter = emit_error_map(records, axis_pair=None)
    with open(run.path("report", "error_scatter.csv"), "w") as fh:
        fh.write("strategy,sample_index,x_name,x,y_name,y,err_u_raw,err_u_color\n")
        for row in scatter:
            fh.write(
                f"{row['strategy']},{row['sample_index']},{row['x_name']},{row['x']:.17g},"
                f"{row['y_name']},{row['y']:.17g},{row['err_u_raw']:.17g},{row['err_u_color']:.17g}\n"
            )
    boxplot_rows = []
    for s in summaries.values():
        boxplot_rows.append(
            {
                "strategy": s.strategy,
                "median": s.median_err_u,
                "q1": s.q1_err_u,
                "q3": s.q3_err_u,
                "outliers": s.outliers_err_u,
            }
        )
    write_json(run.path("report", "boxplot.json"), {"err_u": boxplot_rows})
    write_json(
        run.path("report", "summary.json"),
        {
            name: {
                "n": s.n_records,
                "median_err_u": s.median_err_u,
                "max_err_u": s.max_err_u,
                "median_err_uddot": s.median_err_uddot,
                "max_err_uddot": s.max_err_uddot,
                "mean_speed_up": s.mean_speed_up,
            }
            for name, s in summaries.items()
        },
    )
    log(f"[report] {len(records)} records over {len(summaries)} strategies -> {err_path}")
    return summaries
