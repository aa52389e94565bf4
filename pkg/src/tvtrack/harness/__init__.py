"""Config parsing, experiment orchestration, CSV output and the check catalog."""
