"""Shared-actor / shared-critic deterministic actor-critic updates.

The critic regresses onto the one-step bootstrapped target computed with
delayed (target) copies of both networks; episode ends cut the bootstrap.
The actor ascends the critic with its own action substituted into each
agent slot in turn, all slot gradients accumulating into the single
shared parameter set.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .nets import Actor, Critic


@dataclass
class TrainConfig:
    gamma: float = 0.95
    batch_size: int = 1024
    lr: float = 1e-3
    update_every: int = 100  # env steps between update cycles
    tau: float = 0.01  # target smoothing coefficient
    noise_scale: float = 0.05  # initial exploration noise std (0.1 * a_max)
    noise_decay_steps: int = 100_000  # linear decay horizon
    buffer_capacity: int = 50_000
    total_steps: int = 200_000
    eval_every: int = 5_000
    eval_episodes: int = 4
    seed: int = 0
    warmup_steps: int = 0  # uniform-random action steps before learning
    actor_reg: float = 0.0  # pre-squash logit penalty against tanh saturation

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")


def soft_update(target, source, tau):
    with torch.no_grad():
        for t, s in zip(target.parameters(), source.parameters()):
            t.mul_(1.0 - tau).add_(tau * s)


class MaddpgLearner:
    def __init__(self, n_agents, a_max, config, device="cpu"):
        self.n = n_agents
        self.config = config
        self.device = torch.device(device)
        self.actor = Actor(a_max).to(self.device)
        self.critic = Critic(n_agents).to(self.device)
        self.target_actor = Actor(a_max).to(self.device)
        self.target_critic = Critic(n_agents).to(self.device)
        self.target_actor.load_state_dict(self.actor.state_dict())
        self.target_critic.load_state_dict(self.critic.state_dict())
        for p in self.target_actor.parameters():
            p.requires_grad_(False)
        for p in self.target_critic.parameters():
            p.requires_grad_(False)
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=config.lr)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=config.lr)

    def _tensors(self, batch):
        return {k: torch.as_tensor(v, device=self.device) for k, v in batch.items()}

    def act(self, obs, vel):
        """Greedy shared-actor actions for all agent slots, (N, 2) numpy."""
        with torch.no_grad():
            image = torch.as_tensor(obs, device=self.device)
            velocity = torch.as_tensor(vel, device=self.device)
            return self.actor(image, velocity).cpu().numpy()

    def critic_loss(self, batch):
        """TD loss tensor for the shared critic on an already-tensored batch."""
        if batch["obs"].shape[0] == 0:
            raise ValueError("empty batch")
        b = batch["obs"].shape[0]
        with torch.no_grad():
            flat_next = batch["next_obs"].reshape(b * self.n, *batch["next_obs"].shape[2:])
            flat_vel = batch["next_vel"].reshape(b * self.n, 2)
            next_actions = self.target_actor(flat_next, flat_vel).reshape(b, self.n, 2)
            next_q = self.target_critic(batch["next_obs"], batch["next_vel"], next_actions)
            target = batch["rewards"] + self.config.gamma * (1.0 - batch["dones"]) * next_q
        q = self.critic(batch["obs"], batch["vel"], batch["actions"])
        return F.mse_loss(q, target)

    def actor_objective(self, batch):
        """Mean critic score with the shared actor substituted per slot.

        Maximized; each slot contributes its own substitution term, so the
        shared parameters receive the sum of all slot gradients. Buffered
        actions fill the other slots. With actor_reg > 0 the pre-squash
        logits are penalized, keeping tanh out of its saturated corners.
        """
        total = 0.0
        for slot in range(self.n):
            raw = self.actor.raw(batch["obs"][:, slot], batch["vel"][:, slot])
            action_i = self.actor.a_max * torch.tanh(raw)
            actions = batch["actions"].clone()
            actions[:, slot] = action_i
            score = self.critic(batch["obs"], batch["vel"], actions).mean()
            total = total + score - self.config.actor_reg * (raw**2).mean()
        return total / self.n

    def update(self, batch):
        """One critic step, one actor step, one soft target update."""
        batch = self._tensors(batch)

        loss = self.critic_loss(batch)
        self.critic_opt.zero_grad()
        loss.backward()
        self.critic_opt.step()

        objective = self.actor_objective(batch)
        self.actor_opt.zero_grad()
        (-objective).backward()
        self.actor_opt.step()

        soft_update(self.target_actor, self.actor, self.config.tau)
        soft_update(self.target_critic, self.critic, self.config.tau)
        return float(loss.detach()), float(objective.detach())

    def noise_std(self, step):
        frac = max(0.0, 1.0 - step / self.config.noise_decay_steps)
        return self.config.noise_scale * frac


def save_checkpoint(path, learner, env_config, train_config):
    torch.save(
        {
            "version": 1,
            "n_agents": learner.n,
            "h": env_config["h"],
            "w": env_config["w"],
            "a_max": env_config["a_max"],
            "actor": learner.actor.state_dict(),
            "critic": learner.critic.state_dict(),
            "train_config": vars(train_config),
        },
        path,
    )


def load_actor(path, expect_h=None, expect_w=None):
    """Load the shared actor; verifies the checkpoint's image geometry."""
    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    if ckpt.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version in {path}")
    for key, expect in (("h", expect_h), ("w", expect_w)):
        if expect is not None and ckpt[key] != expect:
            raise ValueError(
                f"checkpoint {key}={ckpt[key]} does not match environment {key}={expect}"
            )
    actor = Actor(ckpt["a_max"])
    actor.load_state_dict(ckpt["actor"])
    actor.eval()
    return actor
