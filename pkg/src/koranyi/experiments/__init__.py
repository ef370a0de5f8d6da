"""Named experiments, their configuration and report files."""
