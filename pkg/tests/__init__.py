"""Test suite for SOMF."""
