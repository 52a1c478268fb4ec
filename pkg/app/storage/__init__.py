"""Storage module"""
