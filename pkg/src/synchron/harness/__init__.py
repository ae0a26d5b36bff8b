"""Case studies, trace tooling, analysis and the CLI."""
