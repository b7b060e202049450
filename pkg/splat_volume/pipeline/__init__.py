"""
Dataset generation, training, rendering, meshing and evaluation built on the splat_volume modules.
"""
