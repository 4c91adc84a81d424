"""Test package for anchor-scene."""
