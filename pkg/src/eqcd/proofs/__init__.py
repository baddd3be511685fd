"""Bundled proof scripts (*.proof.json), rebuilt by `python3 -m eqcd.derivations`."""
