"""Tests for the sectorlab package."""
