from .mppmr import MppmrAction, MppmrEnv, MppmrParams, MppmrState
from .kitchen import KitchenEnv, KitchenLayout, KitchenState, builtin_layout

__all__ = [
    "MppmrAction",
    "MppmrEnv",
    "MppmrParams",
    "MppmrState",
    "KitchenEnv",
    "KitchenLayout",
    "KitchenState",
    "builtin_layout",
]
