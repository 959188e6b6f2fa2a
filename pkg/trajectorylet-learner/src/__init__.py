"""Trajectorylet skeleton action recognition: LangGraph learning pipeline"""

__version__ = "0.1.0"
