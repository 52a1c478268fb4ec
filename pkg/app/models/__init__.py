"""Sample frames and imputation intermediates"""
