"""
Default settings for the splat_volume app.
"""

RENDER_CONFIG = {
    # Pixels per side of a rasterizer tile.
    "tile_size": 16,
    # Intersections with a Gaussian falloff G below this are dropped.
    "min_contribution": 1.0 / 255.0,
    # Compositing stops once transmittance falls below this.
    "min_transmittance": 1e-4,
    "near_plane": 0.01,
    # Rays with |d·n| below this are treated as parallel to the splat.
    "grazing_epsilon": 1e-6,
    # Floor of the alpha divisor in the expected-depth buffer.
    "depth_epsilon": 1e-8,
    # Half-width of the binned footprint in scales; None derives it from min_contribution.
    "bin_sigma": None,
    "background": [1.0, 1.0, 1.0],
}

TRAIN_DEFAULTS = {
    "lr": 2e-4,
    "lr_min": 0.0,
    "epochs": 10,
    "steps_per_epoch": 20,
    "batch_size": 1,
    "grad_accumulation": 1,
    "reg_enabled": True,
    "reg_start_epoch": 3,
    "period_epochs": None,
    "weight_decay": 0.05,
    "betas": [0.9, 0.999],
    "seed": 0,
    "validate_every": 50,
    "precision": "float32",
}

MODEL_PRESETS = {
    "desk": {
        "M": 4, "patch": 8, "O": 32, "C": 32, "B": 32,
        "W_f": 8, "W_e": 8, "G": 4, "layers": 2, "heads": 4,
        "mlp_ratio": 4, "K": 2, "r": 1.0 / 16.0, "sh_order": 2,
        "image_size": 64, "encoder_blocks": 2, "decoder_hidden": 64,
    },
    "full": {
        "M": 4, "patch": 8, "O": 768, "C": 256, "B": 80,
        "W_f": 16, "W_e": 32, "G": 16, "layers": 12, "heads": 8,
        "mlp_ratio": 4, "K": 2, "r": 1.0 / 32.0, "sh_order": 2,
        "image_size": 512, "encoder_blocks": 2, "decoder_hidden": 128,
    },
}
MODEL_PRESETS["full_fast"] = dict(MODEL_PRESETS["full"])

TRAIN_PRESETS = {
    "desk": {},
    "full": {"epochs": 50, "reg_start_epoch": 15, "period_epochs": 10},
    "full_fast": {"epochs": 30, "reg_start_epoch": 9, "period_epochs": 10},
}

LOSS_WEIGHTS = {
    "gamma_d": 1000.0,
    "gamma_n": 0.2,
}

MESH_CONFIG = {
    "resolution": 128,
    "truncation": 0.02,
    "elevations": [30.0, 0.0, -30.0],
    "views_per_ring": 16,
    "radius": 2.0,
    "image_size": 128,
    "focal": 140.0,
    "alpha_threshold": 0.5,
}

DATASET_CONFIG = {
    "views_per_scene": 16,
    "image_size": 64,
    "orbit_radius": 2.0,
    "focal": 70.0,
    "elevation_range": [5.0, 60.0],
    "elevation_jitter": 10.0,
    "held_out_fraction": 0.1,
}


def plugin_settings(settings):
    """
    Adds default settings
    """
    settings.SPLAT_VOLUME_RENDER_CONFIG = dict(RENDER_CONFIG)
    settings.SPLAT_VOLUME_TRAIN_DEFAULTS = dict(TRAIN_DEFAULTS)
    settings.SPLAT_VOLUME_MODEL_PRESETS = {name: dict(preset) for name, preset in MODEL_PRESETS.items()}
    settings.SPLAT_VOLUME_TRAIN_PRESETS = {name: dict(preset) for name, preset in TRAIN_PRESETS.items()}
    settings.SPLAT_VOLUME_LOSS_WEIGHTS = dict(LOSS_WEIGHTS)
    settings.SPLAT_VOLUME_MESH_CONFIG = dict(MESH_CONFIG)
    settings.SPLAT_VOLUME_DATASET_CONFIG = dict(DATASET_CONFIG)
    settings.SPLAT_VOLUME_DETERMINISTIC = False
    settings.SPLAT_VOLUME_FINE_CULLING = True
