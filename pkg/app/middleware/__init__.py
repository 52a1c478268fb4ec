"""Middleware module"""
