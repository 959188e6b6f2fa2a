"""Configuration: pipeline settings, dataset registry, tracing"""
