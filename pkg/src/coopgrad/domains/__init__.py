from .coordination import build_coordination_game, coordination_profile
from .meals import meal_target_distribution
from .soccer import OpponentKind, SoccerConfig, SoccerGame, SoccerState, build_soccer

__all__ = [
    "build_coordination_game",
    "coordination_profile",
    "meal_target_distribution",
    "OpponentKind",
    "SoccerConfig",
    "SoccerGame",
    "SoccerState",
    "build_soccer",
]
