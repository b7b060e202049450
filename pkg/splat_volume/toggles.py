"""
Feature switches for splat_volume.
"""
from edx_toggles.toggles import SettingToggle

# .. toggle_name: SPLAT_VOLUME_DETERMINISTIC
# .. toggle_implementation: SettingToggle
# .. toggle_default: False
# .. toggle_description: Run training and inference in 64-bit precision with a single seeded generator, so that
#   repeated runs produce bit-identical checkpoints and renders.
# .. toggle_use_cases: open_edx
# .. toggle_creation_date: 2026-10-18
DETERMINISTIC = SettingToggle("SPLAT_VOLUME_DETERMINISTIC", default=False, module_name=__name__)

# .. toggle_name: SPLAT_VOLUME_FINE_CULLING
# .. toggle_implementation: SettingToggle
# .. toggle_default: True
# .. toggle_description: Skip the fine decoder for surfels whose coarse opacity is below 1e-3. Turning it off
#   refines every surfel.
# .. toggle_use_cases: open_edx
# .. toggle_creation_date: 2026-10-18
FINE_CULLING = SettingToggle("SPLAT_VOLUME_FINE_CULLING", default=True, module_name=__name__)


def deterministic_enabled(override=False):
    return bool(override) or DETERMINISTIC.is_enabled()


def fine_culling_enabled():
    return FINE_CULLING.is_enabled()
