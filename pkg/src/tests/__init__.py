"""
Test module for SpecTran
"""
