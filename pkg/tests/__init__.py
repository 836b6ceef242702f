"""Test suite package for modedg."""
