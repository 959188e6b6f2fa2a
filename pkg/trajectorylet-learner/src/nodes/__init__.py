"""Workflow nodes for the trajectorylet learning pipeline"""
