"""Margin-constrained multiple imputation for survey nonresponse"""
