"""Tests module"""
