# Константы для текстов справки командной строки и сообщений

PROG_DESCRIPTION = (
    "loclab — численная лаборатория одномерных случайных операторов Шредингера: "
    "показатели Ляпунова, инвариантные меры Фюрстенберга, локализация в конечном объеме, "
    "спектральное усреднение и операторы Кунца-Суйяра."
)

PROG_EPILOG = (
    "Коды завершения: 0 — успех, 2 — ошибка конфигурации или окна, 3 — процедура не сошлась, "
    "1 — прочие ошибки. Число потоков по умолчанию задает LOCLAB_WORKERS."
)

# Глобальные флаги
HELP_CONFIG = "YAML-файл конфигурации эксперимента (флаги подкоманд имеют приоритет)"
HELP_DUMP_CONFIG = "записать итоговую конфигурацию в YAML-файл и выйти"
HELP_SEED = "зерно случайных потоков"
HELP_WORKERS = "число потоков для прохода по реализациям"
HELP_OUTPUT = "каталог для выходных файлов"

# Подкоманды
HELP_LYAPUNOV = "показатель Ляпунова γ(E) по прямому коциклу на сетке энергий (CSV)"
HELP_FURSTENBERG = "инвариантная мера на P¹ и формула Фюрстенберга (JSON)"
HELP_SPECTRUM = "перепись экспоненциальной локализации собственных векторов (CSV + JSON)"
HELP_DYNLOCAL = "корреляторы ρ_L(m, 0) и выборочный sup a_L(m, 0) (CSV + JSON)"
HELP_SPECTRAL_AVG = "формула Ароншайна-Крейна и спектральное усреднение (JSON)"
HELP_KS = "нормы операторов Кунца-Суйяра и ρ_L через их произведения (CSV + JSON)"
HELP_CHECK = "набор проверок инвариантов с дефектами и допусками (JSON)"

# Флаги подкоманд
HELP_ENERGY_GRID = "сетка энергий a:b:step"
HELP_STEPS = "длина произведения n"
HELP_REALIZATIONS = "число реализаций"
HELP_GRID = "число бинов P¹"
HELP_TOL = "порог невязки по полной вариации"
HELP_MAX_ITER = "максимум итераций"
HELP_MATRICES = "распределение матриц"
HELP_ENERGY = "энергия для распределения Андерсона"
HELP_L = "полуширина окна L"
HELP_M_MAX = "наибольшее расстояние m"
HELP_SIZE = "размер матрицы 2L + 1"
HELP_Z = "точка z в виде re,im"
HELP_LAMBDA_MAX = "граница Λ интеграла по константе связи"
HELP_GRID_N = "число узлов сетки N"
HELP_GRID_X = "полуширина сетки X"
HELP_E_POINTS = "число энергий на Σ0"
HELP_MC_REALIZATIONS = "реализаций Монте-Карло для сравнения (0 — без сравнения)"

# Сообщения
MESSAGE_DONE = "Готово: {command} за {elapsed:.3f}s, код завершения {code}"
MESSAGE_FAILED = "Ошибка ({error_type}): {message}"
MESSAGE_CONFIG_DUMPED = "Конфигурация записана в {path}"
MESSAGE_NO_COMMAND = "Не указана подкоманда; см. --help"
