import argparse

from pianoadapt.config import Settings
from pianoadapt.controllers.base import RESIDUAL_BASES
from pianoadapt.controllers.refine_controller import RefineController
from pianoadapt.controllers.residual_controller import ResidualController, best_point
from pianoadapt.controllers.sim_controller import SimController


def train_sim(args: argparse.Namespace, settings: Settings) -> int:
    """
    Train the simulation policy and export tau_sim
    """
    _, f1 = SimController(settings).train(args.song, scripted=args.scripted)
    print(f"{args.song}: tau_sim nominal F1 {f1 * 100:.1f}")
    return 0


def refine(args: argparse.Namespace, settings: Settings) -> int:
    """
    Refine tau_sim on a gap preset
    """
    _, history = RefineController(settings).refine(args.song, args.gap)
    for step in history:
        print(f"iteration {step.iteration}: F1 {step.f1 * 100:.1f} (delta {step.delta:.4f})")
    return 0


def train_residual(args: argparse.Namespace, settings: Settings) -> int:
    """
    Train residual agents over a base trajectory on a gap preset
    """
    result = ResidualController(settings).train(args.song, args.gap, args.base)
    for point in result.curve:
        print(f"episode {point.episode}: F1 {point.f1_mean:.1f} +- {point.f1_sd:.1f}")
    best = best_point(result)
    print(f"best F1 {best.f1_mean:.1f} +- {best.f1_sd:.1f} at episode {best.episode}")
    return 0


def register(subparsers) -> None:
    command = subparsers.add_parser("train-sim", help="PPO in the nominal simulator, exporting tau_sim")
    command.add_argument("song")
    command.add_argument("--scripted", action="store_true", help="Export the kinematic reference instead of training")
    command.add_argument("--total-steps", type=int, default=None, help="Environment steps per hand")
    command.add_argument(
        "--domain-randomization",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Train on gaps drawn from env.randomization (default on)",
    )
    command.set_defaults(
        handler=train_sim,
        overrides=lambda a: {"ppo": {"total_steps": a.total_steps, "domain_randomization": a.domain_randomization}},
    )

    command = subparsers.add_parser("refine", help="Lateral-joint refinement of tau_sim on a gap preset")
    command.add_argument("song")
    command.add_argument("--gap", default="paper-like", help="Gap preset: identity, bias-only or paper-like")
    command.add_argument("--iterations", type=int, default=None)
    command.set_defaults(handler=refine, overrides=lambda a: {"refine": {"iterations": a.iterations}})

    command = subparsers.add_parser("train-residual", help="Residual TD3 over a base trajectory on a gap preset")
    command.add_argument("song")
    command.add_argument("--gap", default="paper-like", help="Gap preset: identity, bias-only or paper-like")
    command.add_argument("--base", default="tau_refined", choices=RESIDUAL_BASES)
    command.add_argument("--episodes", type=int, default=None)
    command.add_argument("--concurrency", choices=("interleaved", "threaded"), default=None)
    command.set_defaults(
        handler=train_residual,
        overrides=lambda a: {"td3": {"episodes": a.episodes, "concurrency": a.concurrency}},
    )
