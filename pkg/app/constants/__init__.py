"""Constants module"""
