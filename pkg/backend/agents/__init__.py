# Make agents directory a Python package
