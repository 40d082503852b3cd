"""Training and evaluation loops built on the env, policies, and trainers.

Seeding layout (everything hangs off the run seed):

* spawn_key (0,): parameter initialization
* spawn_key (2,)/(3,): trainer-internal streams (minibatch shuffle, replay)
* spawn_key (4,): action sampling during rollouts
* spawn_key (5, i): episode i of training
* spawn_key (6, i): episode i of evaluation

Single-worker runs are deterministic: the same config and seed produce
byte-identical metrics files and checkpoints.  In deterministic mode the
wall-clock column is written as 0.0 so the files stay comparable.

Resume: every periodic checkpoint is accompanied by a ``resume`` directory
capturing optimizer state, generator states, the curriculum window, and the
actions of any episode in progress (replayed on restore, which also restores
the env's noise stream).  Restarting from it reproduces the exact parameter
trajectory of an uninterrupted run.  Off-policy training is excluded: its
replay buffer is deliberately not persisted, so ``ddpg`` runs refuse to
resume rather than silently diverge.
"""

from __future__ import annotations

import json
import os
import sys
import time
from collections import deque
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from grasplab.algos.common import Adam, Trajectory
from grasplab.algos.ddpg import DdpgTrainer, actor_forward_np
from grasplab.algos.ppo import PpoTrainer
from grasplab.algos.trpo import TrpoTrainer
from grasplab.curriculum import Z_BAND, Curriculum, Lesson, build_schedule
from grasplab.env import GraspEnv
from grasplab.errors import ConfigError, NonFiniteError
from grasplab.geom import yaw_error_deg
from grasplab.harness.config import RunConfig
from grasplab.harness.metrics import MetricsWriter
from grasplab.nn.checkpoint import load_checkpoint, save_checkpoint
from grasplab.nn.network import (
    GaussianPolicy,
    NetworkSpec,
    arch_preset,
    init_params,
    vector_spec,
)
from grasplab.render import write_frame_sidecar, write_pgm, write_ppm
from grasplab.reward import RewardBreakdown

OUT_ENV_VAR = "GRASPLAB_OUT"
RESUME_STATE_VERSION = 1


# -- shared plumbing -----------------------------------------------------------


def policy_spec(cfg: RunConfig) -> NetworkSpec:
    """Network architecture implied by the observation mode and resolution."""

    action_dim = cfg.env.action_dim
    if cfg.env.obs_mode == "vector":
        return vector_spec(
            cfg.env.observation_shape[0], action_dim=action_dim, hidden=cfg.hidden
        )
    channels = cfg.env.observation_shape[0]
    return arch_preset(
        cfg.env.resolution, channels=channels, action_dim=action_dim, hidden=cfg.hidden
    )


def build_policy(cfg: RunConfig) -> GaussianPolicy:
    spec = policy_spec(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0,)))
    return GaussianPolicy(spec, init_params(spec, rng))


def episode_seed(run_seed: int, index: int, evaluation: bool = False) -> int:
    key = (6, index) if evaluation else (5, index)
    ss = np.random.SeedSequence(entropy=run_seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def fixed_lesson(cfg: RunConfig) -> Lesson:
    """The single lesson used when the curriculum is switched off."""

    return Lesson(
        index=0,
        xy_tol=cfg.fixed_xy_tol,
        z_range=Z_BAND,
        yaw_tol=cfg.fixed_yaw_tol,
        advance_threshold=float("inf"),
    )


def resolve_out_dir(cfg: RunConfig) -> str:
    out = cfg.out_dir
    if not out:
        root = os.environ.get(OUT_ENV_VAR, "runs")
        out = os.path.join(root, f"{cfg.algorithm}_seed{cfg.seed}")
    os.makedirs(out, exist_ok=True)
    return out


def _wall_clock(cfg: RunConfig, t0: float) -> float:
    return 0.0 if cfg.deterministic else time.perf_counter() - t0


class _EpisodeAccum:
    """Running sums for one episode: return, length, per-term means."""

    __slots__ = ("length", "sums")

    def __init__(self) -> None:
        self.length = 0
        self.sums = dict.fromkeys(
            ("r_touch", "r_collision", "r_position", "r_rotation",
             "r_move_toward", "r_face_target"),
            0.0,
        )

    def add(self, breakdown: RewardBreakdown) -> None:
        self.length += 1
        self.sums["r_touch"] += breakdown.touch
        self.sums["r_collision"] += breakdown.collision
        self.sums["r_position"] += breakdown.position
        self.sums["r_rotation"] += breakdown.rotation
        self.sums["r_move_toward"] += breakdown.move_toward
        self.sums["r_face_target"] += breakdown.face_target

    @property
    def episode_return(self) -> float:
        return float(sum(self.sums.values()))

    def means(self) -> dict[str, float]:
        n = max(1, self.length)
        return {k: v / n for k, v in self.sums.items()}


def _stats_row(algorithm: str, stats: dict) -> dict[str, float]:
    """Map trainer statistics onto the fixed metrics columns."""

    if algorithm == "ppo":
        return {
            "policy_loss": -stats["surrogate"],
            "value_loss": stats["value_loss"],
            "entropy": stats["entropy"],
            "kl": stats["approx_kl"],
            "clip_fraction": stats["clip_fraction"],
            "lr": stats["lr"],
            "beta": stats["beta"],
        }
    if algorithm == "trpo":
        return {
            "policy_loss": -stats["surrogate"],
            "value_loss": stats["value_loss"],
            "kl": stats["kl"],
        }
    return {  # ddpg
        "policy_loss": stats["actor_loss"],
        "value_loss": stats["critic_loss"],
    }


@dataclass(frozen=True)
class TrainProgress:
    """Read-only view handed to early-stop callbacks at update boundaries."""

    global_step: int
    episodes: int
    updates: int
    recent_successes: tuple[bool, ...]  # last up-to-1000 episode outcomes
    recent_returns: tuple[float, ...]  # last up-to-100 episode returns


StopFn = Callable[[TrainProgress], bool]


@dataclass(frozen=True)
class TrainResult:
    """What a training run produced and where it put it."""

    status: str  # "completed", "stopped_early", or "aborted_nonfinite"
    global_step: int
    episodes: int
    updates: int
    out_dir: str
    metrics_path: str
    final_checkpoint: str | None
    best_checkpoint: str | None
    best_mean_return: float | None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


# -- resume sidecar ------------------------------------------------------------


def _rng_state(rng: np.random.Generator | None) -> dict | None:
    return None if rng is None else rng.bit_generator.state


def _set_rng_state(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state


def _save_resume(
    resume_dir: str,
    cfg: RunConfig,
    policy: GaussianPolicy,
    opt: Adam | None,
    act_rng: np.random.Generator,
    trainer_rng: np.random.Generator | None,
    curr: Curriculum | None,
    env: GraspEnv,
    counters: dict,
) -> None:
    os.makedirs(resume_dir, exist_ok=True)
    save_checkpoint(os.path.join(resume_dir, "params.bin"), policy.spec, policy.params)
    if opt is not None:
        np.savez(os.path.join(resume_dir, "opt.npz"), **opt.state_arrays())
    in_progress = None
    record = env.episode_record()
    if record.actions:
        in_progress = {"actions": [list(a) for a in record.actions]}
    doc = {
        "version": RESUME_STATE_VERSION,
        "algorithm": cfg.algorithm,
        "counters": counters,
        "act_rng": _rng_state(act_rng),
        "trainer_rng": _rng_state(trainer_rng),
        "curriculum": None
        if curr is None
        else {
            "index": curr.index,
            "returns": list(curr.returns),
            "episodes": curr.episodes,
        },
        "in_progress": in_progress,
    }
    with open(os.path.join(resume_dir, "state.json"), "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_resume(resume_dir: str) -> dict:
    path = os.path.join(resume_dir, "state.json")
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read resume state {path}: {exc}") from exc
    if doc.get("version") != RESUME_STATE_VERSION:
        raise ConfigError(f"unsupported resume state version in {path}")
    return doc


# -- training ------------------------------------------------------------------


def train(
    cfg: RunConfig,
    resume_from: str | None = None,
    stop_fn: StopFn | None = None,
) -> TrainResult:
    """Run one training job to its step budget; returns artifact locations.

    ``stop_fn`` is polled at update boundaries (episode boundaries for the
    off-policy path); returning True ends the run with status
    ``stopped_early`` after the usual final checkpoint.
    """

    out_dir = resolve_out_dir(cfg)
    if cfg.algorithm in ("ppo", "trpo"):
        return _train_on_policy(cfg, out_dir, resume_from, stop_fn)
    if resume_from is not None:
        raise ConfigError(
            "resume is not supported for ddpg: the replay buffer is not persisted"
        )
    return _train_off_policy(cfg, out_dir, stop_fn)


def _make_on_policy_trainer(cfg: RunConfig, policy: GaussianPolicy):
    if cfg.algorithm == "ppo":
        return PpoTrainer(policy, cfg.ppo, horizon_steps=cfg.total_steps, seed=cfg.seed)
    return TrpoTrainer(policy, cfg.trpo, horizon_steps=cfg.total_steps, seed=cfg.seed)


def _train_on_policy(
    cfg: RunConfig,
    out_dir: str,
    resume_from: str | None,
    stop_fn: StopFn | None = None,
) -> TrainResult:
    env = GraspEnv(cfg.env)
    policy = build_policy(cfg)
    trainer = _make_on_policy_trainer(cfg, policy)
    opt: Adam | None = getattr(trainer, "opt", None)
    trainer_rng: np.random.Generator | None = getattr(trainer, "rng", None)
    act_rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(4,)))
    curr = (
        Curriculum(schedule=build_schedule(**cfg.schedule_args), window=cfg.curriculum_window)
        if cfg.curriculum_enabled
        else None
    )

    global_step = 0
    episode = 0
    update = 0
    best_mean: float | None = None
    window: list[float] = []
    successes: deque[bool] = deque(maxlen=1000)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    best_path = os.path.join(out_dir, "ckpt_best.bin")
    best_saved = False
    append = False
    last_step = -1
    ep = _EpisodeAccum()

    doc = None
    if resume_from is not None:
        doc = _load_resume(resume_from)
        if doc["algorithm"] != cfg.algorithm:
            raise ConfigError(
                f"resume state is for {doc['algorithm']!r}, run is {cfg.algorithm!r}"
            )
        policy.params = load_checkpoint(os.path.join(resume_from, "params.bin"), policy.spec)
        if opt is not None:
            with np.load(os.path.join(resume_from, "opt.npz")) as data:
                opt.params = policy.params
                opt.load_state_arrays({k: data[k] for k in data.files})
        _set_rng_state(act_rng, doc["act_rng"])
        if trainer_rng is not None and doc["trainer_rng"] is not None:
            _set_rng_state(trainer_rng, doc["trainer_rng"])
        counters = doc["counters"]
        global_step = counters["global_step"]
        episode = counters["episode"]
        update = counters["update"]
        best_mean = counters["best_mean"]
        window = list(counters["window"])
        best_saved = counters["best_saved"]
        last_step = global_step
        append = True
        if doc["curriculum"] is not None:
            if curr is None:
                raise ConfigError("resume state has a curriculum but the run disables it")
            curr.index = doc["curriculum"]["index"]
            curr.returns.clear()
            curr.returns.extend(doc["curriculum"]["returns"])
            curr.episodes = doc["curriculum"]["episodes"]

    # TRPO promotes parameters to double precision at construction; when
    # resuming we just restored float32 data, so re-promote.
    if cfg.algorithm == "trpo":
        for p in policy.params.values():
            p.data = p.data.astype(np.float64)

    lesson = curr.lesson if curr is not None else fixed_lesson(cfg)
    obs, _ = env.reset(episode_seed(cfg.seed, episode), lesson)
    if doc is not None and doc["in_progress"] is not None:
        # Replay the interrupted episode's actions so the env (including its
        # sensor-noise stream) lands in the exact pre-interrupt state.
        for action in doc["in_progress"]["actions"]:
            result = env.step(np.asarray(action, dtype=np.float64))
            ep.add(result.reward)
            obs = result.observation

    writer = MetricsWriter(metrics_path, append=append, last_step=last_step)
    t0 = time.perf_counter()
    status = "completed"

    def checkpoint_path(update_index: int) -> str:
        return os.path.join(out_dir, f"ckpt_update{update_index:06d}.bin")

    def save_best() -> None:
        nonlocal best_mean, best_saved
        if not window:
            return
        mean = float(np.mean(window[-100:]))
        if best_mean is None or mean > best_mean:
            best_mean = mean
            save_checkpoint(best_path, policy.spec, policy.params)
            best_saved = True

    with writer:
        if cfg.total_steps == 0:
            final = os.path.join(out_dir, "ckpt_final.bin")
            save_checkpoint(final, policy.spec, policy.params)
            return TrainResult(
                status, 0, 0, 0, out_dir, metrics_path, final, None, None
            )

        while global_step < cfg.total_steps:
            take = min(cfg.rollout_steps, cfg.total_steps - global_step)
            buf_obs: list[np.ndarray] = []
            buf_act: list[np.ndarray] = []
            buf_logp: list[float] = []
            buf_val: list[float] = []
            buf_rew: list[float] = []
            buf_done: list[bool] = []
            for _ in range(take):
                action, logp, value = policy.act(obs, act_rng)
                result = env.step(action)
                buf_obs.append(obs)
                buf_act.append(action)
                buf_logp.append(logp)
                buf_val.append(value)
                buf_rew.append(result.reward.total)
                buf_done.append(result.done)
                ep.add(result.reward)
                global_step += 1
                if result.done:
                    episode += 1
                    writer.write_episode(
                        global_step,
                        episode,
                        lesson.index,
                        ep.episode_return,
                        bool(result.info["success"]),
                        ep.length,
                        ep.means(),
                        _wall_clock(cfg, t0),
                    )
                    window.append(ep.episode_return)
                    if len(window) > 100:
                        window.pop(0)
                    successes.append(bool(result.info["success"]))
                    if curr is not None:
                        curr.update(ep.episode_return)
                        lesson = curr.lesson
                    ep = _EpisodeAccum()
                    obs, _ = env.reset(episode_seed(cfg.seed, episode), lesson)
                else:
                    obs = result.observation
            bootstrap = 0.0 if buf_done[-1] else float(policy.value_np(obs[None, ...])[0])
            traj = Trajectory(
                observations=np.stack(buf_obs),
                actions=np.stack(buf_act),
                log_probs=np.array(buf_logp, dtype=np.float64),
                values=np.array(buf_val, dtype=np.float64),
                rewards=np.array(buf_rew, dtype=np.float64),
                dones=np.array(buf_done, dtype=bool),
                bootstrap_value=bootstrap,
            )
            try:
                stats = trainer.update(traj, steps_done=global_step)
            except NonFiniteError as exc:
                print(f"aborting: non-finite training signal ({exc})", file=sys.stderr)
                status = "aborted_nonfinite"
                break
            update += 1
            if update % cfg.update_log_every == 0:
                writer.write_update(
                    global_step, _stats_row(cfg.algorithm, stats), _wall_clock(cfg, t0)
                )
            save_best()
            if update % cfg.checkpoint_every == 0:
                save_checkpoint(checkpoint_path(update), policy.spec, policy.params)
                _save_resume(
                    os.path.join(out_dir, f"resume_update{update:06d}"),
                    cfg,
                    policy,
                    opt,
                    act_rng,
                    trainer_rng,
                    curr,
                    env,
                    {
                        "global_step": global_step,
                        "episode": episode,
                        "update": update,
                        "best_mean": best_mean,
                        "window": window,
                        "best_saved": best_saved,
                    },
                )
            if stop_fn is not None and stop_fn(
                TrainProgress(global_step, episode, update, tuple(successes), tuple(window))
            ):
                status = "stopped_early"
                break

    final: str | None = None
    if status != "aborted_nonfinite":
        final = os.path.join(out_dir, "ckpt_final.bin")
        save_checkpoint(final, policy.spec, policy.params)
    return TrainResult(
        status,
        global_step,
        episode,
        update,
        out_dir,
        metrics_path,
        final,
        best_path if best_saved else None,
        best_mean,
    )


def _train_off_policy(
    cfg: RunConfig, out_dir: str, stop_fn: StopFn | None = None
) -> TrainResult:
    env = GraspEnv(cfg.env)
    spec = policy_spec(cfg)
    trainer = DdpgTrainer(spec, cfg.ddpg, seed=cfg.seed)
    curr = (
        Curriculum(schedule=build_schedule(**cfg.schedule_args), window=cfg.curriculum_window)
        if cfg.curriculum_enabled
        else None
    )

    metrics_path = os.path.join(out_dir, "metrics.csv")
    best_path = os.path.join(out_dir, "ckpt_best.bin")
    best_saved = False
    best_mean: float | None = None
    window: list[float] = []
    successes: deque[bool] = deque(maxlen=1000)
    global_step = 0
    episode = 0
    update = 0
    status = "completed"
    t0 = time.perf_counter()

    def save_params(path: str) -> None:
        save_checkpoint(path, spec, trainer.actor)

    with MetricsWriter(metrics_path) as writer:
        if cfg.total_steps == 0:
            final = os.path.join(out_dir, "ckpt_final.bin")
            save_params(final)
            return TrainResult(
                status, 0, 0, 0, out_dir, metrics_path, final, None, None
            )

        lesson = curr.lesson if curr is not None else fixed_lesson(cfg)
        obs, _ = env.reset(episode_seed(cfg.seed, episode), lesson)
        ep = _EpisodeAccum()
        while global_step < cfg.total_steps:
            action = trainer.act(obs)
            result = env.step(action)
            trainer.observe(
                obs, action, result.reward.total, result.observation, result.done
            )
            ep.add(result.reward)
            global_step += 1
            if trainer.ready():
                try:
                    stats = trainer.update()
                except NonFiniteError as exc:
                    print(
                        f"aborting: non-finite training signal ({exc})", file=sys.stderr
                    )
                    status = "aborted_nonfinite"
                    break
                update += 1
                if update % cfg.update_log_every == 0:
                    writer.write_update(
                        global_step,
                        _stats_row(cfg.algorithm, stats),
                        _wall_clock(cfg, t0),
                    )
                if update % cfg.checkpoint_every == 0:
                    save_params(os.path.join(out_dir, f"ckpt_update{update:06d}.bin"))
            if result.done:
                episode += 1
                writer.write_episode(
                    global_step,
                    episode,
                    lesson.index,
                    ep.episode_return,
                    bool(result.info["success"]),
                    ep.length,
                    ep.means(),
                    _wall_clock(cfg, t0),
                )
                window.append(ep.episode_return)
                if len(window) > 100:
                    window.pop(0)
                successes.append(bool(result.info["success"]))
                mean = float(np.mean(window[-100:]))
                if best_mean is None or mean > best_mean:
                    best_mean = mean
                    save_params(best_path)
                    best_saved = True
                if curr is not None:
                    curr.update(ep.episode_return)
                    lesson = curr.lesson
                ep = _EpisodeAccum()
                if stop_fn is not None and stop_fn(
                    TrainProgress(
                        global_step, episode, update, tuple(successes), tuple(window)
                    )
                ):
                    status = "stopped_early"
                    break
                obs, _ = env.reset(episode_seed(cfg.seed, episode), lesson)
            else:
                obs = result.observation

    final = None
    if status != "aborted_nonfinite":
        final = os.path.join(out_dir, "ckpt_final.bin")
        save_params(final)
    return TrainResult(
        status,
        global_step,
        episode,
        update,
        out_dir,
        metrics_path,
        final,
        best_path if best_saved else None,
        best_mean,
    )


# -- evaluation ------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Aggregate statistics over a batch of deterministic-policy episodes."""

    episodes: int
    success_rate: float
    mean_return: float
    pos_err_mean_m: float
    pos_err_p95_m: float
    yaw_err_mean_deg: float
    yaw_err_p95_deg: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _eval_lesson(cfg: RunConfig) -> Lesson:
    if cfg.curriculum_enabled:
        return build_schedule(**cfg.schedule_args)[-1]
    return fixed_lesson(cfg)


def _deterministic_actor(cfg: RunConfig, checkpoint_path: str):
    """Load a checkpoint and wrap it as obs -> action with no noise."""

    spec = policy_spec(cfg)
    params = load_checkpoint(checkpoint_path, spec)
    if cfg.algorithm == "ddpg":
        def act(obs: np.ndarray) -> np.ndarray:
            return actor_forward_np(spec, params, obs[None, ...])[0]
    else:
        policy = GaussianPolicy(spec, params)
        def act(obs: np.ndarray) -> np.ndarray:
            return policy.act(obs, _EVAL_RNG, deterministic=True)[0]
    return act


_EVAL_RNG = np.random.default_rng(0)  # never consumed: deterministic acting only


def evaluate(
    cfg: RunConfig,
    checkpoint_path: str | None = None,
    oracle: bool = False,
    episodes: int | None = None,
) -> EvalReport:
    """Run the deterministic policy (or the oracle) and summarize errors.

    Position error is the Euclidean distance from the tooltip to the goal
    point at the final step; yaw error is the symmetry-folded heading error
    in degrees at the final step.
    """

    n = cfg.eval_episodes if episodes is None else episodes
    if n <= 0:
        raise ConfigError("evaluation needs at least one episode")
    if not oracle and checkpoint_path is None:
        raise ConfigError("evaluate needs a checkpoint unless oracle=True")

    env = GraspEnv(cfg.env)
    act = None if oracle else _deterministic_actor(cfg, checkpoint_path)
    lesson = _eval_lesson(cfg)

    successes = 0
    returns = np.zeros(n)
    pos_errs = np.zeros(n)
    yaw_errs = np.zeros(n)
    for i in range(n):
        obs, _ = env.reset(episode_seed(cfg.seed, i, evaluation=True), lesson)
        total = 0.0
        done = False
        success = False
        while not done:
            action = env.oracle_action() if oracle else act(obs)
            result = env.step(action)
            total += result.reward.total
            obs = result.observation
            done = result.done
            success = bool(result.info["success"])
        goal = env.goal
        tip = env.tool_pose.position
        target = np.array(
            [
                goal.center_xy[0],
                goal.center_xy[1],
                goal.top_z + 0.5 * (lesson.z_range[0] + lesson.z_range[1]),
            ]
        )
        returns[i] = total
        pos_errs[i] = float(np.linalg.norm(tip - target))
        yaw_errs[i] = abs(
            yaw_error_deg(goal.yaw_deg, env.tool_pose.rotation.yaw_deg(), goal.symmetry)
        )
        successes += int(success)

    return EvalReport(
        episodes=n,
        success_rate=successes / n,
        mean_return=float(returns.mean()),
        pos_err_mean_m=float(pos_errs.mean()),
        pos_err_p95_m=float(np.percentile(pos_errs, 95)),
        yaw_err_mean_deg=float(yaw_errs.mean()),
        yaw_err_p95_deg=float(np.percentile(yaw_errs, 95)),
    )


# -- frame dumps and schedule listings --------------------------------------------


def render_frame_files(cfg: RunConfig, out_dir: str) -> list[str]:
    """Dump the first observation of a fresh episode as image files.

    Depth goes to ``frame_depth.pgm`` (normalized [0, 1] scaled to 8 bits);
    in depth+rgb mode the color channels additionally go to
    ``frame_rgb.ppm``.  A JSON sidecar records the camera model.
    """

    if cfg.env.obs_mode == "vector":
        raise ConfigError("render-frame needs an image observation mode")
    env = GraspEnv(cfg.env)
    lesson = _eval_lesson(cfg)
    obs, episode_cfg = env.reset(episode_seed(cfg.seed, 0, evaluation=True), lesson)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    depth_path = os.path.join(out_dir, "frame_depth.pgm")
    write_pgm(depth_path, obs[0])
    paths.append(depth_path)
    if cfg.env.obs_mode == "depth_rgb":
        rgb_path = os.path.join(out_dir, "frame_rgb.ppm")
        write_ppm(rgb_path, obs[1:4].transpose(1, 2, 0))
        paths.append(rgb_path)
    scene = env.scene
    meta_path = os.path.join(out_dir, "frame_meta.json")
    write_frame_sidecar(
        meta_path,
        env.intrinsics,
        scene.camera,
        scene.near,
        scene.far,
        extra={"seed": cfg.seed, "episode": json.loads(episode_cfg.to_json())},
    )
    paths.append(meta_path)
    return paths


def schedule_rows(cfg: RunConfig) -> list[dict[str, float]]:
    """The tolerance schedule as one dict per lesson, ready for CSV/JSON."""

    rows = []
    for lesson in build_schedule(**cfg.schedule_args):
        rows.append(
            {
                "lesson": lesson.index,
                "xy_tol": lesson.xy_tol,
                "z_lo": lesson.z_range[0],
                "z_hi": lesson.z_range[1],
                "yaw_tol": lesson.yaw_tol,
                "threshold": lesson.advance_threshold,
            }
        )
    return rows
