"""Whole-body locomotion control, footstep planning, and physics simulation
for passive-ankle biped robots."""

__version__ = "0.1.0"
