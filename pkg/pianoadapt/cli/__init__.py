from pianoadapt.cli.evaluation_commands import register as register_evaluation_commands
from pianoadapt.cli.score_commands import register as register_score_commands
from pianoadapt.cli.training_commands import register as register_training_commands
