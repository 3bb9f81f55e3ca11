from enum import Enum

from colorama import Fore, Style


class StageColor(Enum):
    PRETRAIN = Fore.LIGHTBLUE_EX
    SEARCH = Fore.YELLOW
    BEST = Fore.LIGHTGREEN_EX
    RETRAIN = Fore.MAGENTA
    EVAL = Fore.CYAN
    FLOPS = Fore.LIGHTWHITE_EX
    CHECKPOINT = Fore.LIGHTYELLOW_EX


def print_stage_output(output: str, stage: str = "SEARCH") -> None:
    print(f"{StageColor[stage].value}{stage}: {output}{Style.RESET_ALL}")
