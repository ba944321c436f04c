"""
Unit tests for the DP-GD lab.
"""
