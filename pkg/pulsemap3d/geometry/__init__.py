"""Cameras, meshes, software rasterization and texture-space baking."""
