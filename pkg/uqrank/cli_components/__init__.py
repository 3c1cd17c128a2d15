"""Components of the command line: output formatting, exit codes and report files."""
