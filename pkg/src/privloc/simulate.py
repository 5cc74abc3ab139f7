"""Scenario generation, Monte Carlo sweeps, and metric emission.

A trial is one scenario run for a fixed (anchor count, selection size):
the target generates a keypair, distributes the public key, and then one
localization round executes per clock tick over the configured duration.
The first round always uses every anchor (there is no position estimate
to select against yet); when a selection size is configured and more
anchors participate than the size allows, the selection pass at the end
of a round fixes the participant set for the following rounds.

Every round also solves the plaintext float pipeline on the same
measurements ("raw ToA") over all anchors, which is the accuracy
baseline the private estimates are compared against.

Scenario coordinates and send timestamps are drawn uniformly on the
codec grid (2^-frac_bits, sub-millimeter) rather than on the continuum;
this is statistically indistinguishable at field scale and ensures the
only quantization the private pipeline suffers is the genuine one on
measured receive timestamps.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from random import Random

import numpy as np

from privloc import paillier, protocol, zsng
from privloc.encoding import SignedFixedCodec
from privloc.geometry import (SPEED_OF_LIGHT, GeometryError, Position,
                              RangeObservation, build_system, ls_solve,
                              simulate_range)
from privloc.protocol import (ProtocolError, RoundResult, phase_clock,
                              run_round)
from privloc.transcript import Transcript, WireAccounting


@dataclass(frozen=True)
class ExperimentConfig:
    field_dims: tuple[float, float, float] = (1000.0, 1000.0, 100.0)
    anchor_counts: tuple[int, ...] = tuple(range(6, 31, 3))
    selection_n: tuple[int | None, ...] = (10, 15, 20, 25, None)
    sigma_ns: float = 6.1
    trials: int = 50
    duration_s: float = 10.0
    round_interval_s: float = 1.0
    speed_range: tuple[float, float] = (0.0, 10.0)
    key_bits: int = 512
    frac_bits: int = 12
    accounting_mode: str = "paper"
    noise_bits: int = 23
    seed: int = 0

    @property
    def rounds_per_trial(self) -> int:
        return max(1, int(round(self.duration_s / self.round_interval_s)))

    def validate(self) -> None:
        if any(c <= 0 for c in self.anchor_counts) or self.trials <= 0:
            raise ValueError("anchor counts and trials must be positive")
        for n in self.selection_n:
            if n is not None and n < 4:
                raise ValueError("selection sizes must be >= 4 or none")
        if self.accounting_mode not in ("paper", "strict"):
            raise ValueError("accounting_mode must be 'paper' or 'strict'")
        if self.key_bits < 16 or self.frac_bits < 1:
            raise ValueError("invalid key_bits/frac_bits")

    def mask_noise_bits(self) -> int | None:
        """Bounded masks in paper mode, uniform-Z_n masks in strict mode."""
        return self.noise_bits if self.accounting_mode == "paper" else None

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        raw = json.loads(text)
        cfg = ExperimentConfig()
        fields = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
        unknown = set(raw) - set(fields)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, val in raw.items():
            if key == "selection_n":
                kwargs[key] = tuple(None if v in (None, "none") else int(v)
                                    for v in val)
            elif isinstance(fields[key], tuple):
                kwargs[key] = tuple(val)
            else:
                kwargs[key] = val
        cfg = replace(cfg, **kwargs)
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        obj = asdict(self)
        obj["selection_n"] = ["none" if n is None else n for n in self.selection_n]
        return json.dumps(obj, indent=2)


@dataclass
class Scenario:
    target: Position
    anchor_starts: dict[int, np.ndarray]
    anchor_velocities: dict[int, np.ndarray]
    field_dims: tuple[float, float, float]
    grid_step: float

    def anchor_positions_at(self, t: float) -> dict[int, Position]:
        """Constant-velocity motion, reflected at the field bounds."""
        out = {}
        for i, start in self.anchor_starts.items():
            p = start + self.anchor_velocities[i] * t
            coords = []
            for axis, bound in enumerate(self.field_dims):
                q = math.fmod(p[axis], 2.0 * bound)
                if q < 0:
                    q += 2.0 * bound
                if q > bound:
                    q = 2.0 * bound - q
                coords.append(round(q / self.grid_step) * self.grid_step)
            out[i] = Position(*coords)
        return out


def _grid_uniform(rng: Random, hi: float, step: float) -> float:
    return rng.randrange(int(hi / step) + 1) * step


def generate_scenario(config: ExperimentConfig, m: int, rng: Random) -> Scenario:
    step = 2.0 ** -config.frac_bits
    dims = config.field_dims
    target = Position(*(_grid_uniform(rng, d, step) for d in dims))
    starts = {}
    velocities = {}
    for i in range(1, m + 1):
        starts[i] = np.array([_grid_uniform(rng, d, step) for d in dims])
        speed = rng.uniform(*config.speed_range)
        direction = np.array([rng.gauss(0, 1) for _ in range(3)])
        norm = np.linalg.norm(direction)
        velocities[i] = speed * direction / norm if norm else np.zeros(3)
    return Scenario(target, starts, velocities, dims, step)


def _grid_send_time(rng: Random, step: float) -> float:
    """Send timestamp on the codec grid, within the per-round ranging window."""
    lo = int(1e-4 * SPEED_OF_LIGHT / step)
    hi = int(1e-3 * SPEED_OF_LIGHT / step)
    return rng.randrange(lo, hi) * step / SPEED_OF_LIGHT


def simulate_observations(scenario: Scenario, positions: dict[int, Position],
                          sigma_ns: float, rng: Random) -> list[RangeObservation]:
    """Fresh ToA measurements from the target to every anchor."""
    return [simulate_range(scenario.target, positions[i], sigma_ns, rng,
                           anchor_id=i, t_send=_grid_send_time(rng, scenario.grid_step))
            for i in sorted(positions)]


@dataclass
class RoundRecord:
    round_no: int
    participants: int
    err_priv: float
    err_raw: float
    quant_offset: float     # private estimate vs float solve on the same subset


@dataclass
class TrialResult:
    m: int
    n: int | None
    trial: int
    rounds: list[RoundRecord]
    total_bits: int
    bits_by_link: dict
    phase_seconds: dict[str, float]
    wall_seconds: float
    transcript: Transcript | None = None
    round_results: list[RoundResult] | None = None
    scenario: Scenario | None = None

    @property
    def priv_errors(self) -> list[float]:
        return [r.err_priv for r in self.rounds]

    @property
    def raw_errors(self) -> list[float]:
        return [r.err_raw for r in self.rounds]

    def rmse(self) -> float:
        errs = self.priv_errors
        return math.sqrt(sum(e * e for e in errs) / len(errs))


def run_trial(config: ExperimentConfig, m: int, n: int | None, trial: int,
              *, rounds: int | None = None, noise_seed: int | None = None,
              keep_details: bool = False,
              zero_noise: bool = False) -> TrialResult:
    """One full multi-round trial.

    noise_seed re-seeds only the mask/encryption randomness, leaving the
    scenario and measurements untouched (used by the privacy checks);
    zero_noise swaps in all-zero masks, a deliberately broken debug mode.
    """
    # the selection size is deliberately absent from the stream tags so
    # that selective and non-selective runs of the same (m, trial) share
    # scenarios and measurement noise
    tag = f"{config.seed}:{m}:{trial}"
    rng_geom = Random(f"{tag}:geom")
    rng_key = Random(f"{tag}:key")
    rng_crypto = Random(f"{tag}:crypto:{noise_seed if noise_seed is not None else 0}")
    wall0 = phase_clock()

    pk, sk = paillier.keygen(config.key_bits, rng_key)
    codec = SignedFixedCodec(config.frac_bits, pk.n)
    transcript = Transcript(WireAccounting(config.accounting_mode, config.key_bits))
    scenario = generate_scenario(config, m, rng_geom)
    all_ids = sorted(scenario.anchor_starts)
    protocol.distribute_public_key(pk, all_ids, transcript)

    participants = list(all_ids)
    rounds_total = rounds if rounds is not None else config.rounds_per_trial
    phase = {"zsng": 0.0, "nsa": 0.0, "loc": 0.0}
    records: list[RoundRecord] = []
    round_results: list[RoundResult] = []

    for round_no in range(rounds_total):
        positions = scenario.anchor_positions_at(round_no * config.round_interval_s)
        all_obs = simulate_observations(scenario, positions, config.sigma_ns, rng_geom)
        sub_obs = [o for o in all_obs if o.anchor_id in participants]

        need_select = n is not None and len(participants) > n
        candidates = list(participants) if need_select else []
        t0 = phase_clock()
        if zero_noise:
            noise = zsng.NoiseFamily.zeros(participants, candidates)
        else:
            noise = zsng.expand_noise_family(pk, sk, participants, candidates,
                                             rng_crypto, transcript, round_no,
                                             config.mask_noise_bits())
        phase["zsng"] += phase_clock() - t0

        res = run_round(round_no=round_no, target=scenario.target,
                        anchors=positions, participants=participants,
                        keypair=(pk, sk), codec=codec, noise=noise,
                        transcript=transcript, rng_meas=rng_geom,
                        rng_crypto=rng_crypto, sigma_ns=config.sigma_ns,
                        selection_n=n, observations=sub_obs)
        phase["loc"] += res.phase_seconds["loc"]
        phase["nsa"] += res.phase_seconds["nsa"]

        target_arr = scenario.target.as_array()
        raw_pos, _ = ls_solve(*build_system(all_obs, [positions[i] for i in sorted(positions)]))
        sub_pos, _ = ls_solve(*build_system(sub_obs, [positions[o.anchor_id] for o in sub_obs]))
        records.append(RoundRecord(
            round_no=round_no, participants=len(participants),
            err_priv=float(np.linalg.norm(res.estimate.as_array() - target_arr)),
            err_raw=float(np.linalg.norm(raw_pos.as_array() - target_arr)),
            quant_offset=float(np.linalg.norm(res.estimate.as_array() - sub_pos.as_array())),
        ))
        if keep_details:
            round_results.append(res)
        participants = res.next_participants

    return TrialResult(
        m=m, n=n, trial=trial, rounds=records,
        total_bits=transcript.total_bits, bits_by_link=transcript.bits_by_link(),
        phase_seconds=phase, wall_seconds=phase_clock() - wall0,
        transcript=transcript if keep_details else None,
        round_results=round_results if keep_details else None,
        scenario=scenario if keep_details else None,
    )


@dataclass(frozen=True)
class MetricsRecord:
    m: int
    n: int | None
    trial: int
    rmse_m: float
    p50_err: float
    p90_err: float
    total_bits: int
    t_zsng_ms: float
    t_nsa_ms: float
    t_loc_ms: float


def trial_metrics(result: TrialResult) -> MetricsRecord:
    errs = sorted(result.priv_errors)
    return MetricsRecord(
        m=result.m, n=result.n, trial=result.trial,
        rmse_m=result.rmse(),
        p50_err=float(np.percentile(errs, 50)),
        p90_err=float(np.percentile(errs, 90)),
        total_bits=result.total_bits,
        t_zsng_ms=result.phase_seconds["zsng"] * 1e3,
        t_nsa_ms=result.phase_seconds["nsa"] * 1e3,
        t_loc_ms=result.phase_seconds["loc"] * 1e3,
    )


@dataclass
class SweepFailure:
    m: int
    n: int | None
    trial: int
    error: str


def run_sweep(config: ExperimentConfig, progress=None
              ) -> tuple[list[MetricsRecord], list[SweepFailure]]:
    """All (m, n, trial) combinations; failures are recorded, not raised."""
    config.validate()
    records: list[MetricsRecord] = []
    failures: list[SweepFailure] = []
    for m in config.anchor_counts:
        for n in config.selection_n:
            for trial in range(config.trials):
                try:
                    records.append(trial_metrics(run_trial(config, m, n, trial)))
                except (GeometryError, ProtocolError, ValueError) as exc:
                    failures.append(SweepFailure(m, n, trial, str(exc)))
                if progress:
                    progress(m, n, trial)
    return records, failures


def run_oracle_sweep(config: ExperimentConfig
                     ) -> tuple[list[MetricsRecord], list[SweepFailure]]:
    """Plaintext raw-ToA baseline only: same scenarios, no protocol."""
    config.validate()
    records: list[MetricsRecord] = []
    failures: list[SweepFailure] = []
    for m in config.anchor_counts:
        for trial in range(config.trials):
            tag = f"{config.seed}:{m}:None:{trial}"
            rng_geom = Random(f"{tag}:geom")
            scenario = generate_scenario(config, m, rng_geom)
            errs = []
            t0 = phase_clock()
            try:
                for round_no in range(config.rounds_per_trial):
                    positions = scenario.anchor_positions_at(
                        round_no * config.round_interval_s)
                    obs = simulate_observations(scenario, positions,
                                                config.sigma_ns, rng_geom)
                    pos, _ = ls_solve(*build_system(
                        obs, [positions[i] for i in sorted(positions)]))
                    errs.append(float(np.linalg.norm(
                        pos.as_array() - scenario.target.as_array())))
            except (GeometryError, ValueError) as exc:
                failures.append(SweepFailure(m, None, trial, str(exc)))
                continue
            t_loc = (phase_clock() - t0) * 1e3
            records.append(MetricsRecord(
                m=m, n=None, trial=trial,
                rmse_m=math.sqrt(sum(e * e for e in errs) / len(errs)),
                p50_err=float(np.percentile(errs, 50)),
                p90_err=float(np.percentile(errs, 90)),
                total_bits=0, t_zsng_ms=0.0, t_nsa_ms=0.0, t_loc_ms=t_loc))
    return records, failures


CSV_HEADER = ["m", "n", "trial", "rmse_m", "p50_err", "p90_err",
              "total_bits", "t_zsng_ms", "t_nsa_ms", "t_loc_ms"]

_TIMING_COLUMNS = {"t_zsng_ms", "t_nsa_ms", "t_loc_ms"}


def _sorted_records(records):
    return sorted(records, key=lambda r: (r.m, r.n is None, r.n or 0, r.trial))


def summarize(records: list[MetricsRecord]) -> list[dict]:
    """Per-(m, n) aggregates; rmse aggregates as sqrt(mean(rmse^2))."""
    groups: dict[tuple, list[MetricsRecord]] = {}
    for r in records:
        groups.setdefault((r.m, r.n), []).append(r)
    out = []
    for (m, n), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1] is None, kv[0][1] or 0)):
        out.append({
            "m": m,
            "n": "none" if n is None else n,
            "trials": len(rs),
            "rmse_m": math.sqrt(sum(r.rmse_m ** 2 for r in rs) / len(rs)),
            "mean_total_bits": sum(r.total_bits for r in rs) / len(rs),
            "mean_t_loc_ms": sum(r.t_loc_ms for r in rs) / len(rs),
        })
    return out


def emit_results(records: list[MetricsRecord], path, fmt: str = "csv",
                 include_timings: bool = True) -> None:
    """Write records deterministically; csv gets a sibling .summary.json.

    Timing columns are wall-clock measurements and therefore the one part
    of the output not reproducible from the seed; pass
    include_timings=False for byte-identical reruns.
    """
    if not records:
        raise ValueError("no records to emit")
    path = Path(path)
    rows = _sorted_records(records)
    header = [c for c in CSV_HEADER
              if include_timings or c not in _TIMING_COLUMNS]
    if fmt == "csv":
        with open(path, "w", newline="") as fp:
            writer = csv.writer(fp)
            writer.writerow(header)
            for r in rows:
                writer.writerow([_csv_cell(r, c) for c in header])
        summary_path = path.with_suffix(".summary.json")
        with open(summary_path, "w") as fp:
            json.dump({"groups": summarize(rows)}, fp, indent=2)
    elif fmt == "json":
        payload = {
            "records": [{c: _csv_cell(r, c) for c in header} for r in rows],
            "summary": summarize(rows),
        }
        with open(path, "w") as fp:
            json.dump(payload, fp, indent=2)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _csv_cell(record: MetricsRecord, column: str):
    value = getattr(record, column)
    if column == "n":
        return "none" if value is None else value
    if isinstance(value, float):
        return round(value, 9)
    return value
