"""
Production settings for the splat_volume app.
"""

OVERRIDABLE = (
    "SPLAT_VOLUME_RENDER_CONFIG",
    "SPLAT_VOLUME_TRAIN_DEFAULTS",
    "SPLAT_VOLUME_MODEL_PRESETS",
    "SPLAT_VOLUME_TRAIN_PRESETS",
    "SPLAT_VOLUME_LOSS_WEIGHTS",
    "SPLAT_VOLUME_MESH_CONFIG",
    "SPLAT_VOLUME_DATASET_CONFIG",
)


def plugin_settings(settings):
    """
    Override the default app settings with values from ENV_TOKENS.

    Dict-valued settings are merged key by key so a token file only needs the
    keys it changes.
    """
    env_tokens = getattr(settings, "ENV_TOKENS", {}) or {}
    for name in OVERRIDABLE:
        current = getattr(settings, name)
        override = env_tokens.get(name)
        if override:
            setattr(settings, name, {**current, **override})
    settings.SPLAT_VOLUME_DETERMINISTIC = env_tokens.get(
        "SPLAT_VOLUME_DETERMINISTIC",
        settings.SPLAT_VOLUME_DETERMINISTIC,
    )
    settings.SPLAT_VOLUME_FINE_CULLING = env_tokens.get(
        "SPLAT_VOLUME_FINE_CULLING",
        settings.SPLAT_VOLUME_FINE_CULLING,
    )
