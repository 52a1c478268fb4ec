"""Service managers module"""
