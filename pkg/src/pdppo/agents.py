"""PPO, dual-critic PDPPO and the single-critic PDPPO1C ablation.

All three share one actor: a softmax-head network emitting one categorical
distribution per action component. They differ in their critics:

- ``ppo``      one critic on pre-decision observations, trained against
               discounted total rewards; the classic single-stream setup.
- ``pdppo``    two critics. The pre-decision critic sees s_t and is trained
               against the discounted deterministic-reward stream (or the
               total stream, per ``pre_stream``); the post-decision critic
               sees s^x_t and is trained against discounted total rewards.
               The policy advantage is the elementwise max of the two
               advantage estimates.
- ``pdppo1c``  one critic on post-decision observations; its advantage is
               used directly.

Updates run K epochs of shuffled minibatches per collection window. The
actor gradient comes from the clipped surrogate plus the entropy bonus;
each critic is trained on its own mean-squared error with its own
optimizer. Only the actor's gradient is norm-clipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .envs.base import ActionSpec, TwoPhaseEnv
from .nn import Adam, GradientTape, MlpNet, clip_global_norm

AGENT_KINDS = ("ppo", "pdppo", "pdppo1c")

#: exponent bound when forming importance ratios, to keep exp() finite
RATIO_LOG_BOUND = 50.0
#: probability floor inside logs, to keep p*log(p) terms finite
PROB_FLOOR = 1e-300


@dataclass
class AgentConfig:
    """Hyperparameters shared by all agent kinds.

    Defaults follow the grid-walk benchmark settings; the lot-sizing runs
    override ``window`` and ``epochs`` (see ``harness.default_agent_config``).
    """

    gamma: float = 0.90
    clip_eps: float = 0.2
    entropy_coef: float = 0.001  # c1
    value_coef: float = 0.7  # c2
    epochs: int = 50  # K
    window: int = 500  # steps collected per update (u)
    minibatch_size: Optional[int] = None  # None -> window // 4
    lr_actor: float = 0.00055
    lr_critic: float = 0.001
    grad_max_norm: float = 0.5
    advantage_normalize: bool = True
    pre_stream: str = "deterministic_only"  # or "total"
    hidden_sizes: tuple[int, ...] = (64, 64)
    activation: str = "tanh"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.epochs < 0 or self.window < 1:
            raise ValueError("epochs must be >= 0 and window >= 1")
        if self.pre_stream not in ("deterministic_only", "total"):
            raise ValueError("pre_stream must be 'deterministic_only' or 'total'")
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)

    @property
    def effective_minibatch(self) -> int:
        if self.minibatch_size is not None:
            return max(1, int(self.minibatch_size))
        return max(1, self.window // 4)


@dataclass
class Transition:
    """One environment step as the agents see it."""

    obs: np.ndarray
    action: np.ndarray  # per-component choice indices
    logp_old: float
    det_reward: float
    post_obs: np.ndarray
    total_reward: float
    done: bool


class RolloutBuffer:
    """Fixed-capacity storage for one collection window, plus computed fields."""

    def __init__(self, capacity: int, obs_dim: int, n_components: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.post_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, n_components), dtype=np.int64)
        self.logp_old = np.zeros(capacity)
        self.det_rewards = np.zeros(capacity)
        self.total_rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        # filled by prepare_window / compute_advantages
        self.returns_pre: Optional[np.ndarray] = None
        self.returns_post: Optional[np.ndarray] = None
        self.adv_pre: Optional[np.ndarray] = None
        self.adv_x: Optional[np.ndarray] = None
        self.adv: Optional[np.ndarray] = None

    def add(self, obs, action, logp, det_reward, total_reward, post_obs, done) -> None:
        i = self.size
        if i >= self.capacity:
            raise RuntimeError("buffer is full")
        self.obs[i] = obs
        self.post_obs[i] = post_obs
        self.actions[i] = action
        self.logp_old[i] = logp
        self.det_rewards[i] = det_reward
        self.total_rewards[i] = total_reward
        self.dones[i] = done
        self.size = i + 1

    def add_transition(self, tr: Transition) -> None:
        self.add(tr.obs, tr.action, tr.logp_old, tr.det_reward, tr.total_reward, tr.post_obs, tr.done)

    def clear(self) -> None:
        self.size = 0
        self.returns_pre = None
        self.returns_post = None
        self.adv_pre = None
        self.adv_x = None
        self.adv = None

    def transitions(self) -> list[Transition]:
        return [
            Transition(
                obs=self.obs[i].copy(),
                action=self.actions[i].copy(),
                logp_old=float(self.logp_old[i]),
                det_reward=float(self.det_rewards[i]),
                post_obs=self.post_obs[i].copy(),
                total_reward=float(self.total_rewards[i]),
                done=bool(self.dones[i]),
            )
            for i in range(self.size)
        ]


def discounted_returns(rewards: Sequence[float], dones: Sequence[bool], gamma: float) -> np.ndarray:
    """Backward-accumulated discounted reward-to-go, reset at done boundaries."""
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if rewards.shape != dones.shape:
        raise ValueError("rewards and dones must have equal length")
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        if dones[t]:
            acc = 0.0
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Standardize to mean 0 and unit SD, with an SD floor of 1e-8."""
    return (adv - adv.mean()) / max(float(adv.std()), 1e-8)


def critic_values(critic: MlpNet, obs_batch: np.ndarray) -> np.ndarray:
    v = critic.forward(obs_batch)
    return v[:, 0] if v.ndim == 2 else v


def compute_advantages(
    buf: RolloutBuffer, critic_pre: MlpNet, critic_post: MlpNet, cfg: AgentConfig
) -> RolloutBuffer:
    """Dual-critic advantages: per-stream residuals, then the elementwise max.

    Requires returns for both streams to be present on the buffer. When
    ``cfg.advantage_normalize`` is set, only the max advantage is
    standardized; the per-stream residuals stay raw.
    """
    if buf.returns_pre is None or buf.returns_post is None:
        raise RuntimeError("compute returns before advantages")
    n = buf.size
    buf.adv_pre = buf.returns_pre - critic_values(critic_pre, buf.obs[:n])
    buf.adv_x = buf.returns_post - critic_values(critic_post, buf.post_obs[:n])
    raw = np.maximum(buf.adv_pre, buf.adv_x)
    buf.adv = normalize_advantages(raw) if cfg.advantage_normalize else raw
    return buf


def importance_ratio(logp_new, logp_old):
    """exp(logp_new - logp_old) with the exponent clamped to +-50."""
    return np.exp(np.clip(np.asarray(logp_new) - np.asarray(logp_old), -RATIO_LOG_BOUND, RATIO_LOG_BOUND))


def clipped_surrogate(ratios: np.ndarray, advantages: np.ndarray, clip_eps: float) -> np.ndarray:
    """Per-sample min(rho * A, clip(rho, 1-eps, 1+eps) * A)."""
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps)
    return np.minimum(ratios * advantages, clipped * advantages)


def actor_loss(
    ratios: np.ndarray,
    advantages: np.ndarray,
    entropies: np.ndarray,
    critic_losses: Sequence[float],
    cfg: AgentConfig,
) -> float:
    """Minimized actor objective: negated surrogate, minus the entropy bonus,
    plus the weighted critic losses (a constant offset for the actor, since
    the networks share no parameters)."""
    surr = clipped_surrogate(np.asarray(ratios), np.asarray(advantages), cfg.clip_eps)
    return float(
        -np.mean(surr)
        - cfg.entropy_coef * np.mean(entropies)
        + cfg.value_coef * float(sum(critic_losses))
    )


def critic_loss(critic: MlpNet, obs_batch: np.ndarray, returns_batch: np.ndarray) -> float:
    """Mean squared error between predicted values and sampled returns."""
    err = critic_values(critic, np.atleast_2d(obs_batch)) - np.asarray(returns_batch, dtype=np.float64)
    return float(np.mean(err * err))


def sample_action(
    actor: MlpNet, spec: ActionSpec, obs: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, float, float]:
    """Sample one action from the factorized categorical policy.

    Returns the per-component choice indices, the summed log-probability and
    the summed entropy (nats).
    """
    probs = actor.forward(obs)
    if not np.all(np.isfinite(probs)):
        raise FloatingPointError("actor produced non-finite action probabilities")
    indices = np.empty(spec.n_components, dtype=np.int64)
    logp = 0.0
    entropy = 0.0
    off = 0
    for k, arity in enumerate(spec.arities):
        p = probs[off : off + arity]
        a = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
        if a >= arity:  # cumulative rounding at the top end
            a = arity - 1
        logs = np.log(np.maximum(p, PROB_FLOOR))
        logp += float(logs[a])
        entropy -= float(np.dot(p, logs))
        indices[k] = a
        off += arity
    return indices, logp, entropy


def greedy_action(actor: MlpNet, spec: ActionSpec, obs: np.ndarray) -> np.ndarray:
    """Argmax per component; ties break toward the lowest index."""
    probs = actor.forward(obs)
    indices = np.empty(spec.n_components, dtype=np.int64)
    off = 0
    for k, arity in enumerate(spec.arities):
        indices[k] = int(np.argmax(probs[off : off + arity]))
        off += arity
    return indices


@dataclass
class UpdateStats:
    """Mean diagnostics over all minibatches of one update call."""

    actor_loss: float
    critic_loss: float  # nan when the kind has no pre-decision critic
    post_critic_loss: float  # nan when the kind has no post-decision critic
    mean_ratio: float
    mean_entropy: float
    clipped_ratio_min: float
    clipped_ratio_max: float
    first_minibatch_max_ratio_err: float


class Agent:
    """Actor plus kind-dependent critics and their optimizers."""

    def __init__(
        self,
        kind: str,
        obs_dim: int,
        action_spec: ActionSpec,
        cfg: AgentConfig,
        rng: np.random.Generator,
    ):
        if kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {kind!r}; choose from {AGENT_KINDS}")
        self.kind = kind
        self.cfg = cfg
        self.action_spec = action_spec
        self.obs_dim = obs_dim
        self.rng = rng

        sizes = [obs_dim, *cfg.hidden_sizes]
        self.actor = MlpNet(
            sizes + [action_spec.total_choices],
            activation=cfg.activation,
            head="softmax",
            head_segments=action_spec.arities,
            rng=rng,
        )
        critic_sizes = sizes + [1]
        self.critic_pre = (
            MlpNet(critic_sizes, activation=cfg.activation, rng=rng) if kind in ("ppo", "pdppo") else None
        )
        self.critic_post = (
            MlpNet(critic_sizes, activation=cfg.activation, rng=rng) if kind in ("pdppo", "pdppo1c") else None
        )

        self.opt_actor = Adam(self.actor, cfg.lr_actor)
        self.opt_critic_pre = Adam(self.critic_pre, cfg.lr_critic) if self.critic_pre else None
        self.opt_critic_post = Adam(self.critic_post, cfg.lr_critic) if self.critic_post else None

        self._tape_actor = GradientTape(self.actor)
        self._tape_pre = GradientTape(self.critic_pre) if self.critic_pre else None
        self._tape_post = GradientTape(self.critic_post) if self.critic_post else None

        self._offsets = np.cumsum((0,) + action_spec.arities)[:-1]

    # --- acting ----------------------------------------------------------

    def act(self, obs: np.ndarray) -> tuple[np.ndarray, float, float]:
        return sample_action(self.actor, self.action_spec, obs, self.rng)

    def env_action(self, indices: np.ndarray):
        """Indices as the environment expects them (bare int when scalar)."""
        return int(indices[0]) if self.action_spec.n_components == 1 else indices

    # --- returns and advantages ------------------------------------------

    def prepare_window(self, buf: RolloutBuffer) -> None:
        """Fill returns and advantages for the collected window, per kind."""
        n = buf.size
        cfg = self.cfg
        total = buf.total_rewards[:n]
        dones = buf.dones[:n]
        buf.returns_post = discounted_returns(total, dones, cfg.gamma)
        if self.kind == "pdppo":
            pre_rewards = buf.det_rewards[:n] if cfg.pre_stream == "deterministic_only" else total
            buf.returns_pre = discounted_returns(pre_rewards, dones, cfg.gamma)
            compute_advantages(buf, self.critic_pre, self.critic_post, cfg)
        elif self.kind == "ppo":
            buf.returns_pre = buf.returns_post
            raw = buf.returns_post - critic_values(self.critic_pre, buf.obs[:n])
            buf.adv_pre = raw
            buf.adv = normalize_advantages(raw) if cfg.advantage_normalize else raw
        else:  # pdppo1c
            raw = buf.returns_post - critic_values(self.critic_post, buf.post_obs[:n])
            buf.adv_x = raw
            buf.adv = normalize_advantages(raw) if cfg.advantage_normalize else raw

    def _critic_tasks(self, buf: RolloutBuffer) -> list[tuple]:
        """(net, optimizer, tape, inputs, targets, stat slot) per active critic."""
        n = buf.size
        tasks = []
        if self.kind == "ppo":
            tasks.append((self.critic_pre, self.opt_critic_pre, self._tape_pre, buf.obs[:n], buf.returns_post, 0))
        elif self.kind == "pdppo":
            tasks.append((self.critic_pre, self.opt_critic_pre, self._tape_pre, buf.obs[:n], buf.returns_pre, 0))
            tasks.append(
                (self.critic_post, self.opt_critic_post, self._tape_post, buf.post_obs[:n], buf.returns_post, 1)
            )
        else:
            tasks.append(
                (self.critic_post, self.opt_critic_post, self._tape_post, buf.post_obs[:n], buf.returns_post, 1)
            )
        return tasks

    # --- updating ---------------------------------------------------------

    def update(self, buf: RolloutBuffer) -> UpdateStats:
        """K epochs of shuffled minibatch updates on one collected window."""
        cfg = self.cfg
        if buf.size != cfg.window:
            raise RuntimeError(f"buffer holds {buf.size} transitions, expected {cfg.window}")
        self.prepare_window(buf)

        n = buf.size
        mb = cfg.effective_minibatch
        critic_tasks = self._critic_tasks(buf)

        sums = {
            "actor_loss": 0.0,
            "critic": [0.0, 0.0],
            "ratio": 0.0,
            "entropy": 0.0,
        }
        critic_active = [False, False]
        clip_lo, clip_hi = np.inf, -np.inf
        first_mb_err = np.nan
        n_minibatches = 0

        for epoch in range(cfg.epochs):
            perm = self.rng.permutation(n)
            for start in range(0, n, mb):
                idx = perm[start : start + mb]
                batch_critic_losses = []
                # critic forward passes first: their pre-update losses feed
                # the reported actor loss, the parameter updates come after
                # the actor step
                critic_work = []
                for net, opt, tape, inputs, targets, slot in critic_tasks:
                    v, cache = net.forward_cached(inputs[idx])
                    err = v[:, 0] - targets[idx]
                    loss_val = float(np.mean(err * err))
                    batch_critic_losses.append(loss_val)
                    critic_work.append((net, opt, tape, cache, err, slot, loss_val))

                ratios, entropies, surr_mean = self._actor_step(buf, idx)
                if epoch == 0 and start == 0:
                    first_mb_err = float(np.max(np.abs(ratios - 1.0)))
                clipped = np.clip(ratios, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
                clip_lo = min(clip_lo, float(clipped.min()))
                clip_hi = max(clip_hi, float(clipped.max()))

                for net, opt, tape, cache, err, slot, loss_val in critic_work:
                    gy = (2.0 / err.shape[0]) * err[:, None]
                    tape.zero()
                    net.backward(gy, cache, tape)
                    opt.step(tape)
                    sums["critic"][slot] += loss_val
                    critic_active[slot] = True

                sums["actor_loss"] += (
                    -surr_mean
                    - cfg.entropy_coef * float(np.mean(entropies))
                    + cfg.value_coef * float(sum(batch_critic_losses))
                )
                sums["ratio"] += float(np.mean(ratios))
                sums["entropy"] += float(np.mean(entropies))
                n_minibatches += 1

        if n_minibatches == 0:
            return UpdateStats(np.nan, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan)
        return UpdateStats(
            actor_loss=sums["actor_loss"] / n_minibatches,
            critic_loss=sums["critic"][0] / n_minibatches if critic_active[0] else np.nan,
            post_critic_loss=sums["critic"][1] / n_minibatches if critic_active[1] else np.nan,
            mean_ratio=sums["ratio"] / n_minibatches,
            mean_entropy=sums["entropy"] / n_minibatches,
            clipped_ratio_min=clip_lo,
            clipped_ratio_max=clip_hi,
            first_minibatch_max_ratio_err=first_mb_err,
        )

    def _actor_step(self, buf: RolloutBuffer, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """One clipped-surrogate gradient step on a minibatch.

        Returns (ratios, entropies, mean clipped surrogate) for diagnostics.
        """
        cfg = self.cfg
        B = idx.shape[0]
        probs, cache = self.actor.forward_cached(buf.obs[idx])
        logs = np.log(np.maximum(probs, PROB_FLOOR))
        entropies = -np.einsum("ij,ij->i", probs, logs)

        rows = np.arange(B)
        actions = buf.actions[idx]
        chosen_cols = self._offsets[None, :] + actions  # (B, n_components)
        logp_seg = logs[rows[:, None], chosen_cols]
        logp_new = logp_seg.sum(axis=1)

        log_ratio_raw = logp_new - buf.logp_old[idx]
        log_ratio = np.clip(log_ratio_raw, -RATIO_LOG_BOUND, RATIO_LOG_BOUND)
        ratios = np.exp(log_ratio)

        adv = buf.adv[idx]
        surr1 = ratios * adv
        surr2 = np.clip(ratios, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv
        surr = np.minimum(surr1, surr2)

        # gradient w.r.t. probabilities; the surrogate only moves where the
        # unclipped branch is the active minimum (and the exponent clamp is
        # inactive)
        active = (surr1 <= surr2) & (np.abs(log_ratio_raw) < RATIO_LOG_BOUND)
        coef = np.where(active, -(adv / B), 0.0)
        g = (cfg.entropy_coef / B) * (logs + 1.0)  # entropy bonus term
        # d ratio / d p[a] = ratio / p[a], formed in log space so the spike
        # cannot overflow before the softmax Jacobian multiplies by p[a];
        # (row, col) pairs are unique, so plain fancy indexing accumulates
        spike = np.exp(np.minimum(log_ratio[:, None] - logp_seg, 600.0))
        g[rows[:, None], chosen_cols] += coef[:, None] * spike

        self._tape_actor.zero()
        self.actor.backward(g, cache, self._tape_actor)
        clip_global_norm(self._tape_actor, cfg.grad_max_norm)
        self.opt_actor.step(self._tape_actor)
        return ratios, entropies, float(np.mean(surr))

    def action_probabilities(self, obs: np.ndarray) -> np.ndarray:
        return self.actor.forward(obs)


@dataclass
class WindowRecord:
    """One logging row: reward bookkeeping plus update diagnostics."""

    step: int
    window_reward: float
    cumulative_reward: float
    actor_loss: float
    critic_loss: float
    post_critic_loss: float
    entropy: float
    mean_ratio: float
    clipped_ratio_min: float
    clipped_ratio_max: float
    first_minibatch_max_ratio_err: float


@dataclass
class RunLog:
    """Full trace of one training run."""

    agent_kind: str
    seed: int
    total_steps: int
    window: int
    records: list[WindowRecord] = field(default_factory=list)

    def max_window_reward(self) -> float:
        return max(r.window_reward for r in self.records)

    def total_cumulative_reward(self) -> float:
        return self.records[-1].cumulative_reward if self.records else 0.0

    def reward_curve(self) -> list[tuple[int, float]]:
        return [(r.step, r.window_reward) for r in self.records]


def train(agent_kind: str, env: TwoPhaseEnv, cfg: AgentConfig, total_steps: int, seed: int) -> RunLog:
    """Alternate collection windows and updates; fully deterministic per seed.

    The seed is split into independent agent and environment streams; the
    environment is (re)seeded here, so a fresh run never depends on prior
    use of the env instance.
    """
    log, _ = train_with_agent(agent_kind, env, cfg, total_steps, seed)
    return log


def train_with_agent(
    agent_kind: str, env: TwoPhaseEnv, cfg: AgentConfig, total_steps: int, seed: int
) -> tuple[RunLog, Agent]:
    """Like :func:`train`, but also hands back the trained agent."""
    if total_steps < cfg.window:
        raise ValueError("total_steps must be at least one window")
    agent_ss, env_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(agent_ss)
    env_seed = int(env_ss.generate_state(1)[0])

    agent = Agent(agent_kind, env.observation_dim, env.action_spec, cfg, rng)
    buf = RolloutBuffer(cfg.window, env.observation_dim, env.action_spec.n_components)
    obs = env.reset(env_seed)

    log = RunLog(agent_kind=agent_kind, seed=seed, total_steps=total_steps, window=cfg.window)
    cumulative = 0.0
    for w in range(total_steps // cfg.window):
        buf.clear()
        for _ in range(cfg.window):
            indices, logp, _ = agent.act(obs)
            post_obs, det_r = env.step_deterministic(agent.env_action(indices))
            next_obs, stoch_r, done = env.step_stochastic()
            buf.add(obs, indices, logp, det_r, det_r + stoch_r, post_obs, done)
            obs = env.reset() if done else next_obs
        window_reward = float(buf.total_rewards[: buf.size].sum())
        stats = agent.update(buf)
        cumulative += window_reward
        log.records.append(
            WindowRecord(
                step=(w + 1) * cfg.window,
                window_reward=window_reward,
                cumulative_reward=cumulative,
                actor_loss=stats.actor_loss,
                critic_loss=stats.critic_loss,
                post_critic_loss=stats.post_critic_loss,
                entropy=stats.mean_entropy,
                mean_ratio=stats.mean_ratio,
                clipped_ratio_min=stats.clipped_ratio_min,
                clipped_ratio_max=stats.clipped_ratio_max,
                first_minibatch_max_ratio_err=stats.first_minibatch_max_ratio_err,
            )
        )
    return log, agent
