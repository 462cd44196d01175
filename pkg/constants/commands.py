"""Константы подкоманд и форматов выходных файлов."""

from enum import Enum
from typing import Dict, Tuple


class Command(str, Enum):
    """Enum для подкоманд командной строки."""

    LYAPUNOV = "lyapunov"
    FURSTENBERG = "furstenberg"
    SPECTRUM = "spectrum"
    DYNLOCAL = "dynlocal"
    SPECTRAL_AVG = "spectral-avg"
    KS = "ks"
    CHECK = "check"

    @property
    def section(self) -> str:
        """Имя секции конфигурационного файла."""
        return self.value.replace("-", "_")


# Версия формата выходных файлов
FORMAT_VERSION = 1
CSV_MAGIC = f"loclab-csv v{FORMAT_VERSION}"

# Фиксированные столбцы CSV по подкомандам
CSV_COLUMNS: Dict[Command, Tuple[str, ...]] = {
    Command.LYAPUNOV: ("E", "gamma", "stderr", "n", "R"),
    Command.SPECTRUM: ("realization", "k", "E", "gamma", "center", "r2"),
    Command.DYNLOCAL: ("m", "rho_mean", "rho_stderr", "sup_sampled_mean"),
    Command.KS: ("m", "rho_operator", "rho_mc", "mc_stderr", "budget", "agrees"),
}
