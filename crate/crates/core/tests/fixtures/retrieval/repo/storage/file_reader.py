import os


def read_file(path, encoding="utf-8"):
    """Read a whole file and return its text."""
    with open(path, encoding=encoding) as handle:
        return handle.read()


def file_exists(path):
    return os.path.isfile(path)
