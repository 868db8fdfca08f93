"""Page modules for the Text Mountain inspector."""
