from .config import ALGOS, RunConfig, load_config, parse_config_text, resolve
from .report import emit_curves, format_table, moving_average, summarize
from .run import run
