"""
Tests for SME Manifolds
"""
