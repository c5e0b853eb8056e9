import argparse

from pianoadapt.config import Settings
from pianoadapt.controllers.ablate_controller import AblateController
from pianoadapt.controllers.eval_controller import EVAL_SOURCES, EvalController
from pianoadapt.controllers.matrix_controller import MatrixController, matrix_table
from pianoadapt.controllers.rollout_controller import ROLLOUT_MODES, TRAJECTORIES, RolloutController

GAP_HELP = "Gap preset: identity, bias-only or paper-like"


def rollout(args: argparse.Namespace, settings: Settings) -> int:
    """
    One seeded rollout with its step log
    """
    report = RolloutController(settings).run(args.song, args.mode, args.gap, args.trajectory)
    print(
        f"{args.mode} on {args.gap}: F1 {report.f1 * 100:.1f} "
        f"(precision {report.precision:.3f}, recall {report.recall:.3f})"
    )
    return 0


def evaluate(args: argparse.Namespace, settings: Settings) -> int:
    """
    Evaluation protocol plus roll report
    """
    summary, svg, tsv = EvalController(settings).evaluate(args.song, args.gap, args.source)
    print(f"{args.source} on {args.gap}: F1 {summary.mean:.1f} +- {summary.sd:.1f}")
    print(f"report: {svg} {tsv}")
    return 0


def matrix(args: argparse.Namespace, settings: Settings) -> int:
    """
    Six-configuration comparison table
    """
    rows = MatrixController(settings).run(args.song, args.gap)
    print(matrix_table(rows), end="")
    return 0


def ablate(args: argparse.Namespace, settings: Settings) -> int:
    """
    Discount and guided-noise ablations of residual RL
    """
    for row in AblateController(settings).run(args.song, args.gap):
        print(f"{row.parameter}={row.value:g}: F1 {row.f1_mean:.1f} +- {row.f1_sd:.1f}")
    return 0


def register(subparsers) -> None:
    command = subparsers.add_parser("rollout", help="One seeded rollout on a gap preset")
    command.add_argument("song")
    command.add_argument("--mode", default="open-loop", choices=ROLLOUT_MODES)
    command.add_argument("--gap", default="paper-like", help=GAP_HELP)
    command.add_argument("--trajectory", default="tau_sim", choices=TRAJECTORIES, help="Open-loop trajectory")
    command.set_defaults(handler=rollout)

    command = subparsers.add_parser("eval", help="Seeded evaluation protocol and roll report")
    command.add_argument("song")
    command.add_argument("--gap", default="paper-like", help=GAP_HELP)
    command.add_argument("--source", default="tau_refined", choices=EVAL_SOURCES)
    command.add_argument("--rollouts", type=int, default=None)
    command.set_defaults(handler=evaluate, overrides=lambda a: {"eval": {"rollouts": a.rollouts}})

    command = subparsers.add_parser("matrix", help="Compare all baselines and the full pipeline")
    command.add_argument("song")
    command.add_argument("--gap", default="paper-like", help=GAP_HELP)
    command.add_argument("--episodes", type=int, default=None, help="Residual episodes per trained row")
    command.set_defaults(handler=matrix, overrides=lambda a: {"td3": {"episodes": a.episodes}})

    command = subparsers.add_parser("ablate", help="Discount and guided-noise ablations over tau_refined")
    command.add_argument("song")
    command.add_argument("--gap", default="paper-like", help=GAP_HELP)
    command.add_argument("--episodes", type=int, default=None)
    command.set_defaults(handler=ablate, overrides=lambda a: {"td3": {"episodes": a.episodes}})
