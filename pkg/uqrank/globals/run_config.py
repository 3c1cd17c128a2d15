"""Run configuration: the training, model and evaluation knobs of one experiment."""
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, Optional, Tuple

from dotenv import dotenv_values

from uqrank.domain_model.records import SyntheticTaskSpec
from uqrank.globals.errors import ConfigError

LOSS_FLAGS: Tuple[str, ...] = ("CE", "GCE", "VE", "UDL", "KL", "DIV", "TOK")
PLACEMENTS: Tuple[str, ...] = ("after-max-pool", "before-layer")
POOLINGS: Tuple[str, ...] = ("max", "avg")
DIVERSITY_SOURCES: Tuple[str, ...] = ("latent", "decoder-hidden")
SEED_ENV = "UQRANK_SEED"


@dataclass(frozen=True)
class RunConfig:
    """
    Configuration of a training or evaluation run.

    Every field can be set from a flat ``key = value`` file (see :func:`load_run_config`).

    Attributes:
        seed: Root seed of every random stream of the run
        epochs: Number of passes over the training split
        lr: Adam learning rate
        batch_size: Examples per optimizer step
        eta: Weight of the aleatoric uncertainty loss in the total cost
        loss_flags: Enabled cost components, subset of CE, GCE, VE, UDL, KL, DIV, TOK
        conv_dropout: Dropout rate of each conv layer
        conv_placement: ``after-max-pool`` or ``before-layer``
        pooling: ``max`` or ``avg`` pooling in the conv stack
        fc_dropout: Dropout after each fully connected layer of the classifier trunk
        lstm_dropout: Dropout on LSTM inputs and hidden state
        lstm_output_dropout: Dropout on the final LSTM encoding
        mc_active_at_eval: Keep dropout on at evaluation (Monte-Carlo sampling)
        t_mc: Monte-Carlo samples at evaluation
        t_lrt: Logit-reparameterization samples per prediction
        k_latent: Latent samples per prediction for the diversity loss
        lambda_ruam: Gradient reversal scale of the attention rewrite
        gamma_neg: Scale of the negative branch of the attention rewrite
        ruam_enabled: Apply the uncertainty-driven attention rewrite
        ruam_renormalize: Renormalize the rewritten attention map to sum to one
        ruam_feeds_latent: Feed the rewritten context to the latent head too
        udl_literal: Use ``exp(2*delta)`` instead of ``exp(delta**2)`` for UDL
        data_fraction: Fraction of the training split used
        noise_gamma: Multiplicative image noise applied to generated data
        embed_dim: Token embedding size
        hidden_dim: Encoder LSTM size and fused context size
        z_dim: Latent size, also the decoder hidden size
        trunk_dim: Width of the classifier trunk layers
        num_candidates: Candidate answers per round
        min_count: Vocabulary frequency threshold
        max_caption: Caption token limit
        max_question: Question token limit
        max_answer: Answer token limit
        train_dialogs: Synthetic training dialogs when no dataset is given
        val_dialogs: Synthetic validation dialogs when no dataset is given
        rounds_per_dialog: Rounds per synthetic dialog
        diversity_samples: Latent samples per dialog for the SVD diversity score
        diversity_dialogs: Dialogs used for the SVD diversity score
        diversity_source: ``latent`` or ``decoder-hidden`` rows of the diversity matrix
    """

    seed: int = 0
    epochs: int = 30
    lr: float = 4e-4
    batch_size: int = 8
    eta: float = 1.0
    loss_flags: FrozenSet[str] = field(default_factory=lambda: frozenset(LOSS_FLAGS))
    conv_dropout: Tuple[float, ...] = (0.1, 0.2, 0.3)
    conv_placement: str = "after-max-pool"
    pooling: str = "max"
    fc_dropout: float = 0.5
    lstm_dropout: float = 0.3
    lstm_output_dropout: float = 0.5
    mc_active_at_eval: bool = True
    t_mc: int = 25
    t_lrt: int = 10
    k_latent: int = 100
    lambda_ruam: float = 1.0
    gamma_neg: float = -2.0
    ruam_enabled: bool = True
    ruam_renormalize: bool = False
    ruam_feeds_latent: bool = True
    udl_literal: bool = False
    data_fraction: float = 1.0
    noise_gamma: float = 1.0
    embed_dim: int = 16
    hidden_dim: int = 16
    z_dim: int = 16
    trunk_dim: int = 32
    num_candidates: int = 20
    min_count: int = 5
    max_caption: int = 24
    max_question: int = 16
    max_answer: int = 8
    train_dialogs: int = 500
    val_dialogs: int = 100
    rounds_per_dialog: int = 5
    diversity_samples: int = 20
    diversity_dialogs: int = 100
    diversity_source: str = "latent"

    def __post_init__(self) -> None:
        validate_run_config(self)

    def with_overrides(self, **changes: Any) -> "RunConfig":
        """Return a validated copy with some fields replaced."""
        return replace(self, **changes)

    def to_text(self) -> str:
        """Render the config in the ``key = value`` format accepted by :func:`parse_run_config`."""
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_render(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def validate_run_config(config: RunConfig) -> None:
    """Check field ranges.

    Raises:
        ConfigError: On the first field outside its valid range
    """
    if config.lr <= 0:
        raise ConfigError("lr must be > 0")
    if config.eta < 0:
        raise ConfigError("eta must be >= 0")
    if not config.loss_flags:
        raise ConfigError("loss_flags must enable at least one loss")
    unknown = set(config.loss_flags) - set(LOSS_FLAGS)
    if unknown:
        raise ConfigError(f"unknown loss flags: {', '.join(sorted(unknown))}")
    rates = list(config.conv_dropout) + [
        config.fc_dropout,
        config.lstm_dropout,
        config.lstm_output_dropout,
    ]
    if any(not 0.0 <= p <= 1.0 for p in rates):
        raise ConfigError("dropout rates must lie in [0, 1]")
    if not config.conv_dropout:
        raise ConfigError("conv_dropout needs one rate per conv layer")
    if config.conv_placement not in PLACEMENTS:
        raise ConfigError(f"conv_placement must be one of {', '.join(PLACEMENTS)}")
    if config.pooling not in POOLINGS:
        raise ConfigError(f"pooling must be one of {', '.join(POOLINGS)}")
    if config.diversity_source not in DIVERSITY_SOURCES:
        raise ConfigError(f"diversity_source must be one of {', '.join(DIVERSITY_SOURCES)}")
    if not 0.0 < config.data_fraction <= 1.0:
        raise ConfigError("data_fraction must lie in (0, 1]")
    if config.noise_gamma < 0:
        raise ConfigError("noise_gamma must be >= 0")
    if config.lambda_ruam <= 0:
        raise ConfigError("lambda_ruam must be > 0")
    positive = (
        "epochs",
        "batch_size",
        "t_mc",
        "t_lrt",
        "k_latent",
        "embed_dim",
        "hidden_dim",
        "z_dim",
        "trunk_dim",
        "max_caption",
        "max_question",
        "max_answer",
        "train_dialogs",
        "rounds_per_dialog",
        "diversity_samples",
        "diversity_dialogs",
        "min_count",
    )
    for name in positive:
        value = getattr(config, name)
        if name == "epochs" and value == 0:
            continue
        if value < 1:
            raise ConfigError(f"{name} must be >= 1")
    if config.num_candidates < 2:
        raise ConfigError("num_candidates must be >= 2")
    if config.val_dialogs < 0:
        raise ConfigError("val_dialogs must be >= 0")


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, frozenset):
        return ",".join(flag for flag in LOSS_FLAGS if flag in value)
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_flags(raw: str) -> FrozenSet[str]:
    parts = [p.strip().upper() for p in raw.replace("+", ",").split(",") if p.strip()]
    return frozenset(parts)


def _parse_floats(raw: str) -> Tuple[float, ...]:
    return tuple(float(p) for p in raw.split(",") if p.strip())


def _parse_words(raw: str) -> Tuple[str, ...]:
    return tuple(p.strip() for p in raw.split(",") if p.strip())


_PARSERS: Dict[str, Callable[[str], Any]] = {
    "bool": _parse_bool,
    "int": int,
    "float": float,
    "str": lambda raw: raw.strip(),
    "FrozenSet[str]": _parse_flags,
    "Tuple[float, ...]": _parse_floats,
    "Tuple[str, ...]": _parse_words,
}


def _parser_for(type_name: str) -> Callable[[str], Any]:
    return _PARSERS[type_name]


def parse_run_config(
    values: Dict[str, Optional[str]], base: Optional[RunConfig] = None
) -> RunConfig:
    """
    Build a RunConfig from string values.

    Args:
        values: Mapping of field name to raw string value
        base: Config supplying the values not mentioned (defaults to ``RunConfig()``)

    Returns:
        The validated config.

    Raises:
        ConfigError: For unknown keys, missing values or values that fail to parse
    """
    return replace(base or RunConfig(), **_parse_fields(RunConfig, values))


def _parse_fields(cls: Any, values: Dict[str, Optional[str]]) -> Dict[str, Any]:
    known = {f.name: f for f in fields(cls)}
    changes: Dict[str, Any] = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {key}")
        if raw is None or raw.strip() == "":
            raise ConfigError(f"config key {key} has no value")
        type_name = _type_name(known[key].type)
        try:
            changes[key] = _parser_for(type_name)(raw)
        except (ValueError, KeyError) as e:
            raise ConfigError(f"invalid value for {key}: {raw!r} ({e})") from e
    return changes


def _type_name(tp: Any) -> str:
    if tp in (bool, int, float, str):
        return tp.__name__
    return str(tp).replace("typing.", "")


def load_run_config(
    path: Optional[Path] = None, env: Optional[Dict[str, str]] = None
) -> RunConfig:
    """
    Read a ``key = value`` config file and apply the ``UQRANK_SEED`` override.

    Args:
        path: Config file, or None for defaults
        env: Environment to read the seed override from (defaults to ``os.environ``)

    Returns:
        The validated config.

    Raises:
        ConfigError: If the file is missing or holds unknown keys or bad values
    """
    values: Dict[str, Optional[str]] = {}
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        values = dict(dotenv_values(path))
    environ = os.environ if env is None else env
    seed = environ.get(SEED_ENV)
    if seed is not None and seed.strip():
        values["seed"] = seed
    return parse_run_config(values)


def load_task_spec(path: Path, env: Optional[Dict[str, str]] = None) -> SyntheticTaskSpec:
    """
    Read a synthetic-task generation spec in the same ``key = value`` format.

    ``UQRANK_SEED`` overrides ``seed`` here too.

    Raises:
        ConfigError: If the file is missing, holds unknown keys or describes an impossible task
    """
    if not Path(path).is_file():
        raise ConfigError(f"spec file not found: {path}")
    values: Dict[str, Optional[str]] = dict(dotenv_values(path))
    environ = os.environ if env is None else env
    seed = environ.get(SEED_ENV)
    if seed is not None and seed.strip():
        values["seed"] = seed
    spec = SyntheticTaskSpec(**_parse_fields(SyntheticTaskSpec, values))
    spec.validate()
    return spec
