"""Toolkit for analyzing and learning from user interactions with search
clarification panes: engagement analytics, click-bias estimation via
adjacent-answer swaps, intent mining, a two-encoder neural scorer, and a
gradient-boosted re-ranker, all testable against a synthetic interaction
generator with known ground truth."""

__version__ = "0.1.0"
